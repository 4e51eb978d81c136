#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layerlens/errors.hpp"
#include "layerlens/tensor.hpp"

namespace layerlens {

// Architecture hyperparameters of a pre-norm decoder-only model:
// RMS-norm blocks, multi-head causal attention with rotary position encoding,
// gate/up/down MLP, optional attention and MLP biases.
struct ModelConfig {
    std::size_t n_layers = 2;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t head_dim = 16;
    std::size_t d_ff = 128;
    std::size_t vocab_size = 300;
    float rope_theta = 10000.0f;
    float norm_epsilon = 1e-6f;
    bool use_attention_bias = false;
    bool use_mlp_bias = false;
    std::size_t max_seq_len = 4096;
};

inline void validate_config(const ModelConfig& cfg) {
    if (cfg.n_layers < 1) throw input_error("config: n_layers must be >= 1");
    if (cfg.d_model < 1) throw input_error("config: d_model must be >= 1");
    if (cfg.n_heads < 1) throw input_error("config: n_heads must be >= 1");
    if (cfg.head_dim < 1) throw input_error("config: head_dim must be >= 1");
    if (cfg.d_ff < 1) throw input_error("config: d_ff must be >= 1");
    if (cfg.vocab_size < 1) throw input_error("config: vocab_size must be >= 1");
    if (cfg.max_seq_len < 1) throw input_error("config: max_seq_len must be >= 1");
    if (cfg.n_heads * cfg.head_dim != cfg.d_model) {
        throw input_error("config: n_heads * head_dim (" +
                          std::to_string(cfg.n_heads * cfg.head_dim) +
                          ") != d_model (" + std::to_string(cfg.d_model) + ")");
    }
    if (!(cfg.rope_theta > 0.0f)) throw input_error("config: rope_theta must be > 0");
    if (!(cfg.norm_epsilon > 0.0f)) throw input_error("config: norm_epsilon must be > 0");
}

// One transformer block. Weight matrices are stored input-dim x output-dim,
// so a T x d activation matrix multiplies them from the left.
struct LayerWeights {
    Matrix wq, wk, wv, wo;                      // d x d
    std::optional<Vector> bq, bk, bv, bo;       // d
    Matrix w_gate, w_up;                        // d x d_ff
    Matrix w_down;                              // d_ff x d
    std::optional<Vector> b_gate, b_up;         // d_ff
    std::optional<Vector> b_down;               // d
    Vector attn_norm_gain, mlp_norm_gain;       // d
};

// A fully materialized model: config, embeddings, blocks, vocab.
// Immutable after load by convention; every analysis works on copies.
struct Checkpoint {
    ModelConfig config;
    Matrix token_embedding;     // vocab_size x d
    Vector final_norm_gain;     // d
    Matrix output_projection;   // d x vocab_size
    std::vector<LayerWeights> layers;
    std::vector<std::string> vocab;              // raw byte strings
    std::map<std::string, std::string> meta;     // free-form, persisted in the header
};

// Per-layer hidden states from one forward pass. layers[l] row t is the
// residual-stream state of token t after block l ("layer 0" is the output of
// the first block). `embedding` holds the pre-block states.
struct LayerActivations {
    Matrix embedding;             // T x d
    std::vector<Matrix> layers;   // n_layers entries, each T x d
};

namespace detail {

inline void expect_shape(const Matrix& m, std::size_t r, std::size_t c, const std::string& name) {
    if (m.rows != r || m.cols != c || m.data.size() != r * c) {
        throw input_error("checkpoint: tensor '" + name + "' has shape " + shape_str(m) +
                          ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
}

inline void expect_dim(const Vector& v, std::size_t d, const std::string& name) {
    if (v.size() != d) {
        throw input_error("checkpoint: tensor '" + name + "' has dim " + std::to_string(v.size()) +
                          ", expected " + std::to_string(d));
    }
}

inline void expect_finite(const std::vector<float>& data, const std::string& name) {
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw input_error("checkpoint: tensor '" + name + "' contains a non-finite value");
        }
    }
}

inline void expect_bias(const std::optional<Vector>& b, bool enabled, std::size_t d,
                        const std::string& name) {
    if (enabled) {
        if (!b) throw input_error("checkpoint: missing bias tensor '" + name + "'");
        expect_dim(*b, d, name);
        expect_finite(*b, name);
    } else if (b) {
        throw input_error("checkpoint: unexpected bias tensor '" + name + "'");
    }
}

}  // namespace detail

// Checks every structural invariant: tensor shapes, bias presence matching the
// config flags, finite values, vocab size and byte coverage. Throws
// input_error naming the offending tensor.
inline void validate_checkpoint(const Checkpoint& ckpt) {
    validate_config(ckpt.config);
    const auto& cfg = ckpt.config;
    const std::size_t d = cfg.d_model;

    detail::expect_shape(ckpt.token_embedding, cfg.vocab_size, d, "tok_emb");
    detail::expect_finite(ckpt.token_embedding.data, "tok_emb");
    detail::expect_dim(ckpt.final_norm_gain, d, "final_norm");
    detail::expect_finite(ckpt.final_norm_gain, "final_norm");
    detail::expect_shape(ckpt.output_projection, d, cfg.vocab_size, "lm_head");
    detail::expect_finite(ckpt.output_projection.data, "lm_head");

    if (ckpt.layers.size() != cfg.n_layers) {
        throw input_error("checkpoint: has " + std::to_string(ckpt.layers.size()) +
                          " layers, config says " + std::to_string(cfg.n_layers));
    }
    for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
        const auto& w = ckpt.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        detail::expect_shape(w.wq, d, d, p + "wq");
        detail::expect_shape(w.wk, d, d, p + "wk");
        detail::expect_shape(w.wv, d, d, p + "wv");
        detail::expect_shape(w.wo, d, d, p + "wo");
        detail::expect_shape(w.w_gate, d, cfg.d_ff, p + "w_gate");
        detail::expect_shape(w.w_up, d, cfg.d_ff, p + "w_up");
        detail::expect_shape(w.w_down, cfg.d_ff, d, p + "w_down");
        for (const Matrix* m : {&w.wq, &w.wk, &w.wv, &w.wo, &w.w_gate, &w.w_up, &w.w_down}) {
            detail::expect_finite(m->data, p + "*");
        }
        detail::expect_bias(w.bq, cfg.use_attention_bias, d, p + "bq");
        detail::expect_bias(w.bk, cfg.use_attention_bias, d, p + "bk");
        detail::expect_bias(w.bv, cfg.use_attention_bias, d, p + "bv");
        detail::expect_bias(w.bo, cfg.use_attention_bias, d, p + "bo");
        detail::expect_bias(w.b_gate, cfg.use_mlp_bias, cfg.d_ff, p + "b_gate");
        detail::expect_bias(w.b_up, cfg.use_mlp_bias, cfg.d_ff, p + "b_up");
        detail::expect_bias(w.b_down, cfg.use_mlp_bias, d, p + "b_down");
        detail::expect_dim(w.attn_norm_gain, d, p + "attn_norm");
        detail::expect_finite(w.attn_norm_gain, p + "attn_norm");
        detail::expect_dim(w.mlp_norm_gain, d, p + "mlp_norm");
        detail::expect_finite(w.mlp_norm_gain, p + "mlp_norm");
    }

    if (ckpt.vocab.size() != cfg.vocab_size) {
        throw input_error("checkpoint: vocab has " + std::to_string(ckpt.vocab.size()) +
                          " entries, config says " + std::to_string(cfg.vocab_size));
    }
    // Byte fallback: all 256 single-byte tokens must be present so that any
    // byte string tokenizes. Also reject duplicates; the tokenizer needs an
    // injective string -> id map.
    std::vector<bool> byte_seen(256, false);
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < ckpt.vocab.size(); ++i) {
        const std::string& tok = ckpt.vocab[i];
        if (tok.empty()) throw input_error("checkpoint: vocab entry " + std::to_string(i) + " is empty");
        if (tok.size() == 1) byte_seen[static_cast<unsigned char>(tok[0])] = true;
        auto [it, inserted] = seen.emplace(tok, i);
        if (!inserted) {
            throw input_error("checkpoint: duplicate vocab entry at indices " +
                              std::to_string(it->second) + " and " + std::to_string(i));
        }
    }
    for (int b = 0; b < 256; ++b) {
        if (!byte_seen[b]) {
            throw input_error("checkpoint: vocab is missing single-byte token " + std::to_string(b));
        }
    }
}

}  // namespace layerlens
