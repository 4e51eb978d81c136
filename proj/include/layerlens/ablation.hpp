#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "layerlens/errors.hpp"
#include "layerlens/evaluate.hpp"
#include "layerlens/model.hpp"

namespace layerlens {

// Zero-ablation of one transformer block: every attention and MLP weight
// matrix (wq, wk, wv, wo, w_gate, w_up, w_down) and every present bias of the
// target layer becomes exactly 0.0. Norm gains are left untouched — with zero
// sublayer outputs they cannot influence the residual stream, and keeping
// them makes the ablation minimal. Under the pre-norm architecture the layer
// then computes the identity, h^(l) = h^(l-1). The source checkpoint is not
// modified.
inline Checkpoint ablate_layer(const Checkpoint& ckpt, std::size_t layer) {
    if (layer >= ckpt.layers.size()) {
        throw input_error("ablate_layer: layer " + std::to_string(layer) +
                          " out of range for " + std::to_string(ckpt.layers.size()) + " layers");
    }
    Checkpoint out = ckpt;
    LayerWeights& w = out.layers[layer];
    auto zero_matrix = [](Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0f); };
    auto zero_vector = [](std::optional<Vector>& v) {
        if (v) std::fill(v->begin(), v->end(), 0.0f);
    };
    zero_matrix(w.wq);
    zero_matrix(w.wk);
    zero_matrix(w.wv);
    zero_matrix(w.wo);
    zero_matrix(w.w_gate);
    zero_matrix(w.w_up);
    zero_matrix(w.w_down);
    zero_vector(w.bq);
    zero_vector(w.bk);
    zero_vector(w.bv);
    zero_vector(w.bo);
    zero_vector(w.b_gate);
    zero_vector(w.b_up);
    zero_vector(w.b_down);
    return out;
}

struct AblationRecord {
    int layer = -1;  // -1 marks the un-ablated baseline
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    std::size_t n_problems = 0;
    std::size_t n_repeats = 0;
};

struct AblationReport {
    std::string model_id;
    std::string dataset_id;
    AblationRecord baseline;
    std::vector<AblationRecord> records;  // one per swept layer, input order
};

namespace detail {

inline AblationRecord accuracy_over_repeats(const Checkpoint& ckpt, const BenchmarkSet& dataset,
                                            const PromptTemplate& tpl,
                                            const SamplingParams& params, int layer,
                                            std::size_t repeats, std::size_t threads) {
    std::vector<double> accuracies(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        SamplingParams run_params = params;
        run_params.seed = params.seed + r;
        accuracies[r] = evaluate(ckpt, dataset, tpl, run_params, threads).accuracy;
    }
    double mean = 0.0;
    for (double a : accuracies) mean += a;
    mean /= double(repeats);
    double var = 0.0;
    for (double a : accuracies) var += (a - mean) * (a - mean);
    var /= double(repeats);

    AblationRecord rec;
    rec.layer = layer;
    rec.accuracy_mean = mean;
    rec.accuracy_std = std::sqrt(var);
    rec.n_problems = dataset.items.size();
    rec.n_repeats = repeats;
    return rec;
}

}  // namespace detail

// Accuracy-vs-ablated-layer sweep: evaluates the un-ablated baseline plus one
// ablated variant per requested layer. Repeat r reseeds as params.seed + r;
// the whole report is deterministic given the master seed. Item-level
// parallelism is delegated to evaluate() via `threads`.
inline AblationReport run_ablation_sweep(const Checkpoint& ckpt, const std::string& model_id,
                                         const BenchmarkSet& dataset, const PromptTemplate& tpl,
                                         const SamplingParams& params,
                                         const std::vector<std::size_t>& layers,
                                         std::size_t repeats, std::size_t threads = 1) {
    if (dataset.items.empty()) {
        throw input_error("ablation sweep: dataset '" + dataset.name + "' is empty");
    }
    if (repeats < 1) throw input_error("ablation sweep: repeats must be >= 1");
    for (std::size_t layer : layers) {
        if (layer >= ckpt.layers.size()) {
            throw input_error("ablation sweep: layer " + std::to_string(layer) +
                              " out of range for " + std::to_string(ckpt.layers.size()) +
                              " layers");
        }
    }

    AblationReport report;
    report.model_id = model_id;
    report.dataset_id = dataset.name;
    try {
        report.baseline = detail::accuracy_over_repeats(ckpt, dataset, tpl, params, -1, repeats,
                                                        threads);
    } catch (const std::exception& e) {
        throw input_error(std::string("ablation sweep: baseline evaluation failed: ") + e.what());
    }
    for (std::size_t layer : layers) {
        try {
            const Checkpoint ablated = ablate_layer(ckpt, layer);
            report.records.push_back(detail::accuracy_over_repeats(
                ablated, dataset, tpl, params, int(layer), repeats, threads));
        } catch (const std::exception& e) {
            throw input_error("ablation sweep: layer " + std::to_string(layer) +
                              " evaluation failed: " + e.what());
        }
    }
    return report;
}

// RMS, over all tokens and dimensions, of what each block added to the
// residual stream: delta^(l) = H^(l) - H^(l-1), with delta^(0) measured
// against the embedding states. An ablated (identity) layer scores exactly
// 0.0.
inline std::vector<double> residual_contribution_norms(const LayerActivations& acts) {
    std::vector<double> norms;
    norms.reserve(acts.layers.size());
    const Matrix* prev = &acts.embedding;
    for (const Matrix& h : acts.layers) {
        if (h.rows != prev->rows || h.cols != prev->cols) {
            throw shape_error("residual norms: layer state " + shape_str(h) +
                              " vs previous " + shape_str(*prev));
        }
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < h.data.size(); ++i) {
            const double d = double(h.data[i]) - double(prev->data[i]);
            sum_sq += d * d;
        }
        norms.push_back(std::sqrt(sum_sq / double(h.data.size())));
        prev = &h;
    }
    return norms;
}

}  // namespace layerlens
