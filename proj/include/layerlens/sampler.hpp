#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "layerlens/errors.hpp"
#include "layerlens/forward.hpp"
#include "layerlens/rng.hpp"
#include "layerlens/tensor.hpp"
#include "layerlens/tokenizer.hpp"

namespace layerlens {

struct SamplingParams {
    float temperature = 0.7f;
    float top_p = 0.9f;
    std::size_t max_tokens = 512;
    uint64_t seed = 0;
};

inline void validate_sampling_params(const SamplingParams& p) {
    if (!(p.temperature >= 0.0f)) {
        throw input_error("sampling: temperature must be >= 0, got " +
                          std::to_string(p.temperature));
    }
    if (!(p.top_p > 0.0f && p.top_p <= 1.0f)) {
        throw input_error("sampling: top_p must be in (0,1], got " + std::to_string(p.top_p));
    }
}

// Index of the largest logit; ties go to the lowest index.
inline int argmax_token(const Vector& logits) {
    if (logits.empty()) throw input_error("argmax_token: empty logits");
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return int(best);
}

// Softmax of logits / temperature. Requires temperature > 0.
inline Vector temperature_softmax(const Vector& logits, float temperature) {
    Vector scaled(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
    return softmax(scaled);
}

// Nucleus filtering: sort by (probability desc, index asc), keep the smallest
// prefix whose cumulative mass reaches top_p (everything, if rounding keeps
// the total below top_p), and renormalize the kept mass to 1.
inline std::vector<std::pair<int, double>> nucleus_filter(const Vector& probs, float top_p) {
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[std::size_t(a)] != probs[std::size_t(b)]) {
            return probs[std::size_t(a)] > probs[std::size_t(b)];
        }
        return a < b;
    });

    std::size_t kept = order.size();
    double cumulative = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cumulative += double(probs[std::size_t(order[i])]);
        if (cumulative >= double(top_p)) {
            kept = i + 1;
            break;
        }
    }

    double mass = 0.0;
    for (std::size_t i = 0; i < kept; ++i) mass += double(probs[std::size_t(order[i])]);
    std::vector<std::pair<int, double>> out;
    out.reserve(kept);
    for (std::size_t i = 0; i < kept; ++i) {
        out.emplace_back(order[i], double(probs[std::size_t(order[i])]) / mass);
    }
    return out;
}

// One sampling step. temperature = 0 degenerates to exact argmax (the rng is
// not consumed); otherwise inverse-CDF sampling over the nucleus-filtered,
// temperature-scaled distribution.
inline int sample_next(const Vector& logits_row, const SamplingParams& params, Rng& rng) {
    validate_sampling_params(params);
    if (logits_row.empty()) throw input_error("sample_next: empty logits");
    if (params.temperature == 0.0f) return argmax_token(logits_row);

    const Vector probs = temperature_softmax(logits_row, params.temperature);
    const auto kept = nucleus_filter(probs, params.top_p);
    const double r = rng.next_double();
    double cumulative = 0.0;
    for (const auto& [token, p] : kept) {
        cumulative += p;
        if (r < cumulative) return token;
    }
    return kept.back().first;
}

// Generation stops on any listed token id (checked before the token is
// appended) or when any stop string appears in the decoded completion (the
// completion is truncated at the earliest such occurrence).
struct StopCriteria {
    std::vector<int> token_ids;
    std::vector<std::string> strings;
};

// Autoregressive decode: returns only the completion (prompt excluded).
// Deterministic given (checkpoint, prompt, params.seed).
inline std::string generate(const Checkpoint& ckpt, const std::string& prompt,
                            const SamplingParams& params, const StopCriteria& stop = {}) {
    validate_sampling_params(params);
    std::vector<int> ids = tokenize(ckpt.vocab, prompt);
    if (ids.empty()) throw input_error("generate: prompt tokenizes to zero tokens");
    if (ids.size() > ckpt.config.max_seq_len) {
        throw input_error("generate: prompt length " + std::to_string(ids.size()) +
                          " exceeds max_seq_len " + std::to_string(ckpt.config.max_seq_len));
    }

    Rng rng(params.seed);
    std::string completion;
    for (std::size_t step = 0; step < params.max_tokens; ++step) {
        if (ids.size() >= ckpt.config.max_seq_len) {
            throw input_error("generate: context overflow at max_seq_len " +
                              std::to_string(ckpt.config.max_seq_len));
        }
        const Matrix logits = forward(ckpt, ids).logits;
        const float* last = logits.row(logits.rows - 1);
        const Vector row(last, last + logits.cols);
        const int next = sample_next(row, params, rng);

        if (std::find(stop.token_ids.begin(), stop.token_ids.end(), next) !=
            stop.token_ids.end()) {
            break;
        }
        ids.push_back(next);
        completion += ckpt.vocab[std::size_t(next)];

        std::size_t cut = std::string::npos;
        for (const std::string& s : stop.strings) {
            if (s.empty()) continue;
            const std::size_t pos = completion.find(s);
            if (pos != std::string::npos) cut = std::min(cut, pos);
        }
        if (cut != std::string::npos) {
            completion.resize(cut);
            break;
        }
    }
    return completion;
}

}  // namespace layerlens
