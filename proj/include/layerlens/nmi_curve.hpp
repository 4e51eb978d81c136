#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "layerlens/dataset.hpp"
#include "layerlens/errors.hpp"
#include "layerlens/forward.hpp"
#include "layerlens/kmeans.hpp"
#include "layerlens/model.hpp"
#include "layerlens/nmi.hpp"
#include "layerlens/parallel.hpp"
#include "layerlens/rng.hpp"
#include "layerlens/tokenizer.hpp"

namespace layerlens {

struct NmiCurve {
    std::vector<double> values;  // per-layer mean NMI vs the layer-0 baseline
    std::vector<double> std;     // per-layer standard deviation over runs
    std::size_t n_runs = 0;
    std::size_t k = 0;
};

namespace detail {

inline NmiCurve summarize_runs(const std::vector<std::vector<double>>& per_run,
                               std::size_t n_layers, std::size_t k) {
    NmiCurve curve;
    curve.n_runs = per_run.size();
    curve.k = k;
    curve.values.resize(n_layers);
    curve.std.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        double mean = 0.0;
        for (const auto& run : per_run) mean += run[l];
        mean /= double(per_run.size());
        double var = 0.0;
        for (const auto& run : per_run) var += (run[l] - mean) * (run[l] - mean);
        var /= double(per_run.size());
        curve.values[l] = mean;
        curve.std[l] = std::sqrt(var);
    }
    return curve;
}

}  // namespace detail

// NMI-vs-layer curve from one set of captured activations. Run r clusters
// every layer's token states with seed + r; the layer-0 clustering is that
// run's baseline, so the layer-0 value is exactly 1.0 in every run. Results
// are independent of the thread count.
inline NmiCurve nmi_curve_from_activations(const LayerActivations& acts, std::size_t k,
                                           std::size_t n_runs, uint64_t seed,
                                           std::size_t threads = 1) {
    if (acts.layers.empty()) throw input_error("nmi curve: no layer activations");
    if (n_runs < 1) throw input_error("nmi curve: n_runs must be >= 1");
    const std::size_t T = acts.layers[0].rows;
    if (T < k) {
        throw input_error("nmi curve: prompt has " + std::to_string(T) +
                          " tokens but k = " + std::to_string(k) + " needs at least " +
                          std::to_string(k));
    }

    const std::size_t L = acts.layers.size();
    std::vector<std::vector<int>> baselines(n_runs);
    parallel_for(n_runs, threads, [&](std::size_t r) {
        baselines[r] = kmeans(acts.layers[0], k, seed + r).labels;
    });

    std::vector<std::vector<double>> per_run(n_runs, std::vector<double>(L, 0.0));
    parallel_for(n_runs * L, threads, [&](std::size_t job) {
        const std::size_t r = job / L;
        const std::size_t l = job % L;
        const std::vector<int> labels = kmeans(acts.layers[l], k, seed + r).labels;
        per_run[r][l] = nmi(baselines[r], labels);
    });
    return detail::summarize_runs(per_run, L, k);
}

// Single-prompt curve: one capture forward pass (no decoding), then
// per-layer clustering as above.
inline NmiCurve nmi_curve(const Checkpoint& ckpt, const std::string& prompt, std::size_t k,
                          std::size_t n_runs, uint64_t seed, std::size_t threads = 1) {
    const std::vector<int> tokens = tokenize(ckpt.vocab, prompt);
    if (tokens.empty()) throw input_error("nmi curve: prompt tokenizes to zero tokens");
    const auto acts = forward(ckpt, tokens, true).activations;
    return nmi_curve_from_activations(*acts, k, n_runs, seed, threads);
}

// Deterministic prompt corpus: n distinct items drawn by a seeded partial
// Fisher-Yates shuffle, each rendered as a "Question: ...\n\nAnswer: ...\n\n"
// block and concatenated in draw order.
inline std::string build_nmi_prompt(const BenchmarkSet& set, std::size_t n, uint64_t seed) {
    if (n < 1) throw input_error("nmi prompt: need at least one item");
    if (set.items.size() < n) {
        throw input_error("nmi prompt: dataset '" + set.name + "' has " +
                          std::to_string(set.items.size()) + " items, need " + std::to_string(n));
    }
    std::vector<std::size_t> order(set.items.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng rng(seed);
    std::string prompt;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + std::size_t(rng.next_below(order.size() - i));
        std::swap(order[i], order[j]);
        const BenchmarkItem& item = set.items[order[i]];
        prompt += "Question: " + item.question + "\n\nAnswer: " + item.reference_answer + "\n\n";
    }
    return prompt;
}

struct NmiExperiment {
    NmiCurve curve;
    std::vector<uint64_t> prompt_seeds;  // one per run; identical when not resampling
};

// Full experiment: with resample_prompts (the default), run r rebuilds the
// prompt corpus with seed + r and takes its own forward pass; clustering in
// run r always uses seed + r. With resampling off, all runs share one prompt
// and forward pass and differ only in clustering seeds.
inline NmiExperiment nmi_curve_experiment(const Checkpoint& ckpt, const BenchmarkSet& set,
                                          std::size_t n_items, std::size_t k,
                                          std::size_t n_runs, uint64_t seed,
                                          bool resample_prompts = true,
                                          std::size_t threads = 1) {
    if (n_runs < 1) throw input_error("nmi experiment: n_runs must be >= 1");
    NmiExperiment exp;
    if (!resample_prompts) {
        exp.prompt_seeds.assign(n_runs, seed);
        exp.curve = nmi_curve(ckpt, build_nmi_prompt(set, n_items, seed), k, n_runs, seed,
                              threads);
        return exp;
    }

    const std::size_t L = ckpt.config.n_layers;
    std::vector<std::vector<double>> per_run(n_runs);
    for (std::size_t r = 0; r < n_runs; ++r) {
        exp.prompt_seeds.push_back(seed + r);
        const NmiCurve one = nmi_curve(ckpt, build_nmi_prompt(set, n_items, seed + r), k, 1,
                                       seed + r, threads);
        per_run[r] = one.values;
    }
    exp.curve = detail::summarize_runs(per_run, L, k);
    return exp;
}

// Qualitative dump: cluster the layer's token states and group the prompt's
// token strings by cluster id, keeping prompt order within each cluster.
inline std::vector<std::vector<std::string>> dump_cluster_members(
    const LayerActivations& acts, const std::vector<std::string>& vocab,
    const std::vector<int>& token_ids, std::size_t layer, std::size_t k, uint64_t seed) {
    if (layer >= acts.layers.size()) {
        throw input_error("cluster dump: layer " + std::to_string(layer) +
                          " out of range for " + std::to_string(acts.layers.size()) + " layers");
    }
    const Matrix& states = acts.layers[layer];
    if (token_ids.size() != states.rows) {
        throw input_error("cluster dump: " + std::to_string(token_ids.size()) +
                          " token ids vs " + std::to_string(states.rows) + " state rows");
    }
    const Clustering cl = kmeans(states, k, seed);
    std::vector<std::vector<std::string>> groups(k);
    for (std::size_t t = 0; t < token_ids.size(); ++t) {
        const int id = token_ids[t];
        if (id < 0 || std::size_t(id) >= vocab.size()) {
            throw input_error("cluster dump: token id " + std::to_string(id) +
                              " outside vocab of " + std::to_string(vocab.size()));
        }
        groups[std::size_t(cl.labels[t])].push_back(vocab[std::size_t(id)]);
    }
    return groups;
}

}  // namespace layerlens
