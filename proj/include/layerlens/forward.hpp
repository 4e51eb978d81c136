#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "layerlens/errors.hpp"
#include "layerlens/model.hpp"
#include "layerlens/tensor.hpp"

namespace layerlens {

// Row-wise RMS normalization: each row of x is normalized independently and
// scaled by the gain vector.
inline Matrix rms_norm_rows(const Matrix& x, const Vector& gain, float epsilon) {
    if (x.cols != gain.size()) {
        throw shape_error("rms_norm_rows: " + shape_str(x) + " rows vs gain dim " +
                          std::to_string(gain.size()));
    }
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const Vector row(x.row(i), x.row(i) + x.cols);
        const Vector normed = rms_norm(row, gain, epsilon);
        std::copy(normed.begin(), normed.end(), out.row(i));
    }
    return out;
}

// Interleaved rotary position embedding applied in place. Row t is treated as
// position t. Within each head, dimension pair (2p, 2p+1) is rotated by
// angle = t * theta^(-2p / head_dim).
inline void apply_rope(Matrix& x, std::size_t n_heads, std::size_t head_dim, float theta) {
    if (head_dim % 2 != 0) {
        throw shape_error("apply_rope: head_dim must be even, got " + std::to_string(head_dim));
    }
    if (x.cols != n_heads * head_dim) {
        throw shape_error("apply_rope: " + shape_str(x) + " vs " + std::to_string(n_heads) +
                          " heads x " + std::to_string(head_dim));
    }
    const std::size_t half = head_dim / 2;
    std::vector<double> inv_freq(half);
    for (std::size_t p = 0; p < half; ++p) {
        inv_freq[p] = std::pow(double(theta), -2.0 * double(p) / double(head_dim));
    }
    for (std::size_t t = 0; t < x.rows; ++t) {
        float* row = x.row(t);
        for (std::size_t h = 0; h < n_heads; ++h) {
            float* head = row + h * head_dim;
            for (std::size_t p = 0; p < half; ++p) {
                const double angle = double(t) * inv_freq[p];
                const float c = float(std::cos(angle));
                const float s = float(std::sin(angle));
                const float x0 = head[2 * p];
                const float x1 = head[2 * p + 1];
                head[2 * p] = x0 * c - x1 * s;
                head[2 * p + 1] = x0 * s + x1 * c;
            }
        }
    }
}

namespace detail {

// y = x * w (+ bias broadcast over rows).
inline Matrix linear(const Matrix& x, const Matrix& w, const std::optional<Vector>& bias) {
    Matrix y = matmul(x, w);
    if (bias) {
        if (bias->size() != y.cols) {
            throw shape_error("linear: bias dim " + std::to_string(bias->size()) + " vs " +
                              shape_str(y));
        }
        for (std::size_t i = 0; i < y.rows; ++i) {
            float* row = y.row(i);
            for (std::size_t j = 0; j < y.cols; ++j) row[j] += (*bias)[j];
        }
    }
    return y;
}

// Causal multi-head self-attention over pre-normalized input u (T x d).
inline Matrix attention_block(const Matrix& u, const LayerWeights& w, const ModelConfig& cfg) {
    Matrix q = linear(u, w.wq, w.bq);
    Matrix k = linear(u, w.wk, w.bk);
    Matrix v = linear(u, w.wv, w.bv);
    apply_rope(q, cfg.n_heads, cfg.head_dim, cfg.rope_theta);
    apply_rope(k, cfg.n_heads, cfg.head_dim, cfg.rope_theta);

    const std::size_t T = u.rows;
    const float inv_scale = 1.0f / std::sqrt(float(cfg.head_dim));
    Matrix mixed(T, cfg.d_model);
    Vector scores;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const std::size_t off = h * cfg.head_dim;
        for (std::size_t i = 0; i < T; ++i) {
            scores.assign(i + 1, 0.0f);
            const float* qi = q.row(i) + off;
            for (std::size_t j = 0; j <= i; ++j) {
                const float* kj = k.row(j) + off;
                float dot = 0.0f;
                for (std::size_t c = 0; c < cfg.head_dim; ++c) dot += qi[c] * kj[c];
                scores[j] = dot * inv_scale;
            }
            const Vector probs = softmax(scores);
            float* out = mixed.row(i) + off;
            for (std::size_t j = 0; j <= i; ++j) {
                const float* vj = v.row(j) + off;
                const float p = probs[j];
                for (std::size_t c = 0; c < cfg.head_dim; ++c) out[c] += p * vj[c];
            }
        }
    }
    return linear(mixed, w.wo, w.bo);
}

// Gated MLP over pre-normalized input u: down(silu(gate(u)) * up(u)).
inline Matrix mlp_block(const Matrix& u, const LayerWeights& w) {
    Matrix gate = linear(u, w.w_gate, w.b_gate);
    const Matrix up = linear(u, w.w_up, w.b_up);
    for (std::size_t i = 0; i < gate.data.size(); ++i) {
        gate.data[i] = silu(gate.data[i]) * up.data[i];
    }
    return linear(gate, w.w_down, w.b_down);
}

inline void add_in_place(Matrix& x, const Matrix& delta) {
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += delta.data[i];
}

}  // namespace detail

struct ForwardResult {
    Matrix logits;  // T x vocab_size
    std::optional<LayerActivations> activations;
};

// Full forward pass. Pre-norm blocks: x += Attn(rms_norm(x)); then
// x += Mlp(rms_norm(x)). With capture set, activations record the residual
// stream after each block ("layer 0" = output of the first block) plus the
// raw embedding states.
inline ForwardResult forward(const Checkpoint& ckpt, const std::vector<int>& tokens,
                             bool capture = false) {
    const ModelConfig& cfg = ckpt.config;
    if (tokens.empty()) throw input_error("forward: empty token sequence");
    if (tokens.size() > cfg.max_seq_len) {
        throw input_error("forward: sequence length " + std::to_string(tokens.size()) +
                          " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] < 0 || std::size_t(tokens[t]) >= cfg.vocab_size) {
            throw input_error("forward: token id " + std::to_string(tokens[t]) +
                              " at position " + std::to_string(t) + " outside vocab of " +
                              std::to_string(cfg.vocab_size));
        }
    }

    const std::size_t T = tokens.size();
    Matrix x(T, cfg.d_model);
    for (std::size_t t = 0; t < T; ++t) {
        const float* emb = ckpt.token_embedding.row(std::size_t(tokens[t]));
        std::copy(emb, emb + cfg.d_model, x.row(t));
    }

    ForwardResult result;
    if (capture) {
        result.activations.emplace();
        result.activations->embedding = x;
        result.activations->layers.reserve(cfg.n_layers);
    }

    for (const LayerWeights& w : ckpt.layers) {
        const Matrix attn_out =
            detail::attention_block(rms_norm_rows(x, w.attn_norm_gain, cfg.norm_epsilon), w, cfg);
        detail::add_in_place(x, attn_out);
        const Matrix mlp_out =
            detail::mlp_block(rms_norm_rows(x, w.mlp_norm_gain, cfg.norm_epsilon), w);
        detail::add_in_place(x, mlp_out);
        if (capture) result.activations->layers.push_back(x);
    }

    const Matrix final_normed = rms_norm_rows(x, ckpt.final_norm_gain, cfg.norm_epsilon);
    result.logits = matmul(final_normed, ckpt.output_projection);
    return result;
}

}  // namespace layerlens
