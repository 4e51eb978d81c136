#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "layerlens/ablation.hpp"
#include "layerlens/checkpoint_io.hpp"
#include "layerlens/errors.hpp"
#include "layerlens/forward.hpp"
#include "test_util.hpp"

using namespace layerlens;

namespace {

bool all_zero(const Matrix& m) {
    for (float v : m.data) {
        if (v != 0.0f) return false;
    }
    return true;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

// A factual template plus a dataset whose empty alias matches any response:
// accuracy is 1.0 by construction, which makes sweep plumbing observable.
PromptTemplate trivial_template() {
    PromptTemplate tpl;
    tpl.name = "plain";
    tpl.body = "Q: {question}\nA:";
    return tpl;
}

BenchmarkSet always_correct_set(std::size_t n) {
    BenchmarkSet set;
    set.name = "oracle";
    for (std::size_t i = 0; i < n; ++i) {
        BenchmarkItem item;
        item.id = "q" + std::to_string(i);
        item.question = "item number " + std::to_string(i);
        item.reference_answer = "x";
        item.aliases = {""};
        item.task_kind = TaskKind::factual;
        set.items.push_back(item);
    }
    return set;
}

SamplingParams short_params(uint64_t seed) {
    SamplingParams params;
    params.max_tokens = 4;
    params.seed = seed;
    return params;
}

}  // namespace

TEST_CASE("ablation zeroes every weight and bias of the target layer", "[ablation]") {
    auto cfg = testutil::tiny_config();
    cfg.use_attention_bias = true;
    cfg.use_mlp_bias = true;
    const Checkpoint ckpt = generate_toy_checkpoint(cfg, 3);
    const Checkpoint cut = ablate_layer(ckpt, 1);

    const LayerWeights& w = cut.layers[1];
    for (const Matrix* m : {&w.wq, &w.wk, &w.wv, &w.wo, &w.w_gate, &w.w_up, &w.w_down}) {
        CHECK(all_zero(*m));
    }
    for (const auto* b : {&w.bq, &w.bk, &w.bv, &w.bo, &w.b_gate, &w.b_up, &w.b_down}) {
        REQUIRE(b->has_value());
        for (float v : **b) REQUIRE(v == 0.0f);
    }
    // Norm gains survive: with zero sublayer outputs they are inert, and the
    // ablated checkpoint still passes full validation.
    CHECK(w.attn_norm_gain == ckpt.layers[1].attn_norm_gain);
    CHECK(w.mlp_norm_gain == ckpt.layers[1].mlp_norm_gain);
    CHECK_NOTHROW(validate_checkpoint(cut));

    // Other layers are untouched.
    CHECK(bitwise_equal(cut.layers[0].wq, ckpt.layers[0].wq));
    CHECK(bitwise_equal(cut.token_embedding, ckpt.token_embedding));
}

TEST_CASE("ablation does not modify its input and is idempotent", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(5);
    const Matrix original_wq = ckpt.layers[0].wq;
    const Checkpoint once = ablate_layer(ckpt, 0);
    CHECK(bitwise_equal(ckpt.layers[0].wq, original_wq));

    const Checkpoint twice = ablate_layer(once, 0);
    CHECK(bitwise_equal(twice.layers[0].wq, once.layers[0].wq));
    CHECK(bitwise_equal(twice.layers[0].w_down, once.layers[0].w_down));
}

TEST_CASE("an ablated layer is a bitwise identity on the residual stream", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(9, /*layers=*/4);
    const std::vector<int> tokens = {3, 1, 4, 1, 5, 9, 2, 6};

    for (std::size_t layer : {std::size_t(0), std::size_t(2), std::size_t(3)}) {
        const Checkpoint cut = ablate_layer(ckpt, layer);
        const ForwardResult out = forward(cut, tokens, /*capture=*/true);
        const Matrix& after = out.activations->layers[layer];
        const Matrix& before = layer == 0 ? out.activations->embedding
                                          : out.activations->layers[layer - 1];
        REQUIRE(bitwise_equal(after, before));
    }
}

TEST_CASE("ablating the last layer equals removing it", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(13, /*layers=*/3);
    Checkpoint shorter = ckpt;
    shorter.layers.pop_back();
    shorter.config.n_layers = 2;

    const std::vector<int> tokens = {7, 8, 9, 10};
    const Matrix ablated_logits = forward(ablate_layer(ckpt, 2), tokens).logits;
    const Matrix shorter_logits = forward(shorter, tokens).logits;
    CHECK(bitwise_equal(ablated_logits, shorter_logits));
}

TEST_CASE("ablating a middle layer equals erasing it from the stack", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(13, /*layers=*/3);
    Checkpoint spliced = ckpt;
    spliced.layers.erase(spliced.layers.begin() + 1);
    spliced.config.n_layers = 2;

    const std::vector<int> tokens = {2, 4, 6, 8, 10};
    CHECK(bitwise_equal(forward(ablate_layer(ckpt, 1), tokens).logits,
                        forward(spliced, tokens).logits));
}

TEST_CASE("ablate_layer rejects out-of-range layers", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(5, /*layers=*/2);
    CHECK_THROWS_AS(ablate_layer(ckpt, 2), input_error);
    CHECK_THROWS_WITH(ablate_layer(ckpt, 99), Catch::Matchers::ContainsSubstring("99"));
}

TEST_CASE("sweep reports baseline plus one record per layer", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(25, /*layers=*/2);
    const auto set = always_correct_set(3);
    const auto report = run_ablation_sweep(ckpt, "toy", set, trivial_template(), short_params(4),
                                           {0, 1}, /*repeats=*/2);

    CHECK(report.model_id == "toy");
    CHECK(report.dataset_id == "oracle");
    CHECK(report.baseline.layer == -1);
    CHECK(report.baseline.accuracy_mean == 1.0);
    CHECK(report.baseline.accuracy_std == 0.0);
    CHECK(report.baseline.n_problems == 3);
    CHECK(report.baseline.n_repeats == 2);

    REQUIRE(report.records.size() == 2);
    for (std::size_t l = 0; l < report.records.size(); ++l) {
        CHECK(report.records[l].layer == int(l));
        CHECK(report.records[l].accuracy_mean == 1.0);
        CHECK(report.records[l].n_problems == 3);
        CHECK(report.records[l].n_repeats == 2);
    }
}

TEST_CASE("sweep with no layers yields only the baseline", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(25);
    const auto report = run_ablation_sweep(ckpt, "toy", always_correct_set(2),
                                           trivial_template(), short_params(1), {}, 1);
    CHECK(report.baseline.layer == -1);
    CHECK(report.records.empty());
}

TEST_CASE("sweep is deterministic in the master seed", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(25);
    const auto set = always_correct_set(3);
    const auto a = run_ablation_sweep(ckpt, "m", set, trivial_template(), short_params(7), {0}, 3);
    const auto b = run_ablation_sweep(ckpt, "m", set, trivial_template(), short_params(7), {0}, 3);
    CHECK(a.baseline.accuracy_mean == b.baseline.accuracy_mean);
    CHECK(a.records[0].accuracy_mean == b.records[0].accuracy_mean);
    CHECK(a.records[0].accuracy_std == b.records[0].accuracy_std);
}

TEST_CASE("sweep records match direct per-layer evaluation", "[ablation]") {
    // Compositional oracle: with repeats = 1 each record must equal a direct
    // evaluate() call on the ablated checkpoint with the same seed.
    const Checkpoint ckpt = testutil::tiny_model(25, /*layers=*/2);
    const auto set = always_correct_set(4);
    const auto tpl = trivial_template();
    const auto params = short_params(11);

    const auto report = run_ablation_sweep(ckpt, "m", set, tpl, params, {0, 1}, 1);
    CHECK(report.baseline.accuracy_mean == evaluate(ckpt, set, tpl, params).accuracy);
    for (std::size_t l = 0; l < 2; ++l) {
        const double direct = evaluate(ablate_layer(ckpt, l), set, tpl, params).accuracy;
        CHECK(report.records[l].accuracy_mean == direct);
        CHECK(report.records[l].accuracy_std == 0.0);
    }
}

TEST_CASE("repeat statistics are the population mean and std", "[ablation]") {
    // Mixed dataset: one item that always matches and one math item that a
    // toy model cannot answer, so accuracy is 0.5 on every repeat.
    BenchmarkSet set = always_correct_set(1);
    BenchmarkItem hard;
    hard.id = "m0";
    hard.question = "unanswerable";
    hard.reference_answer = "42";
    hard.aliases = {"42"};
    hard.task_kind = TaskKind::math;
    set.items.push_back(hard);

    const Checkpoint ckpt = testutil::tiny_model(25);
    const auto report = run_ablation_sweep(ckpt, "m", set, trivial_template(), short_params(2),
                                           {}, 4);
    CHECK(report.baseline.accuracy_mean == Catch::Approx(0.5).margin(1e-12));
    CHECK(report.baseline.accuracy_std == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("sweep validates dataset, repeats and layer indices", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(25, /*layers=*/2);
    const BenchmarkSet empty{"empty", {}};
    CHECK_THROWS_AS(run_ablation_sweep(ckpt, "m", empty, trivial_template(), short_params(0),
                                       {0}, 1),
                    input_error);
    const auto set = always_correct_set(1);
    CHECK_THROWS_AS(run_ablation_sweep(ckpt, "m", set, trivial_template(), short_params(0),
                                       {0}, 0),
                    input_error);
    CHECK_THROWS_WITH(run_ablation_sweep(ckpt, "m", set, trivial_template(), short_params(0),
                                         {2}, 1),
                      Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("residual contributions: ablated layers score exactly zero", "[ablation]") {
    const Checkpoint ckpt = testutil::tiny_model(33, /*layers=*/4);
    const std::vector<int> tokens = {1, 2, 3, 4, 5, 6};

    const auto base = forward(ckpt, tokens, true);
    const auto base_norms = residual_contribution_norms(*base.activations);
    REQUIRE(base_norms.size() == 4);
    for (double n : base_norms) CHECK(n > 0.0);

    const auto cut = forward(ablate_layer(ckpt, 2), tokens, true);
    const auto cut_norms = residual_contribution_norms(*cut.activations);
    CHECK(cut_norms[2] == 0.0);
    CHECK(cut_norms[0] > 0.0);
    CHECK(cut_norms[1] > 0.0);
    CHECK(cut_norms[3] > 0.0);
    // Layers before the cut see identical inputs, so their deltas agree.
    CHECK(cut_norms[0] == base_norms[0]);
    CHECK(cut_norms[1] == base_norms[1]);
}

TEST_CASE("residual contributions match a hand-computed value", "[ablation]") {
    LayerActivations acts;
    acts.embedding = Matrix(2, 2);
    acts.embedding.at(0, 0) = 1.0f;
    acts.embedding.at(0, 1) = 2.0f;
    acts.embedding.at(1, 0) = 3.0f;
    acts.embedding.at(1, 1) = 4.0f;

    Matrix h0(2, 2);
    h0.at(0, 0) = 2.0f;  // delta 1
    h0.at(0, 1) = 4.0f;  // delta 2
    h0.at(1, 0) = 6.0f;  // delta 3
    h0.at(1, 1) = 8.0f;  // delta 4
    acts.layers.push_back(h0);
    acts.layers.push_back(h0);  // second layer adds nothing

    const auto norms = residual_contribution_norms(acts);
    REQUIRE(norms.size() == 2);
    // RMS of {1,2,3,4} = sqrt(30/4).
    CHECK(norms[0] == Catch::Approx(std::sqrt(30.0 / 4.0)).margin(1e-12));
    CHECK(norms[1] == 0.0);
}

TEST_CASE("residual contributions reject mismatched shapes", "[ablation]") {
    LayerActivations acts;
    acts.embedding = Matrix(2, 3);
    acts.layers.push_back(Matrix(2, 3));
    acts.layers.push_back(Matrix(3, 3));
    CHECK_THROWS_AS(residual_contribution_norms(acts), shape_error);
}
