#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "layerlens/answer_matching.hpp"
#include "layerlens/dataset.hpp"
#include "layerlens/errors.hpp"
#include "layerlens/model.hpp"
#include "layerlens/parallel.hpp"
#include "layerlens/prompt_templates.hpp"
#include "layerlens/sampler.hpp"

namespace layerlens {

struct EvalResult {
    std::string id;
    std::string raw_response;
    std::optional<std::string> extracted;  // boxed answer; math items only
    bool correct = false;
    std::string error;  // non-empty when generation failed (e.g. context overflow)
};

struct EvalOutcome {
    double accuracy = 0.0;
    std::vector<EvalResult> results;
};

// Evaluates every item: render prompt, generate, then match — math answers
// via boxed extraction + exact-rational comparison against the reference,
// factual answers via case-insensitive alias substring search. Item i uses
// seed params.seed + i, which keeps results independent of the thread count.
// A generation failure (context overflow) marks the item incorrect with the
// error recorded instead of aborting the run.
inline EvalOutcome evaluate(const Checkpoint& ckpt, const BenchmarkSet& set,
                            const PromptTemplate& tpl, const SamplingParams& params,
                            std::size_t threads = 1) {
    if (set.items.empty()) throw input_error("evaluate: dataset '" + set.name + "' is empty");
    validate_template(tpl);
    validate_sampling_params(params);

    EvalOutcome outcome;
    outcome.results.resize(set.items.size());
    StopCriteria stop;
    stop.strings = tpl.stop_sequences;

    parallel_for(set.items.size(), threads, [&](std::size_t i) {
        const BenchmarkItem& item = set.items[i];
        EvalResult& r = outcome.results[i];
        r.id = item.id;

        SamplingParams item_params = params;
        item_params.seed = params.seed + i;
        const std::string prompt = render_prompt(tpl, item);
        try {
            r.raw_response = generate(ckpt, prompt, item_params, stop);
        } catch (const input_error& e) {
            r.error = e.what();
            return;
        }

        if (item.task_kind == TaskKind::math) {
            r.extracted = extract_boxed_answer(r.raw_response);
            r.correct = r.extracted && math_answers_equal(*r.extracted, item.reference_answer);
        } else {
            r.correct = substring_match(r.raw_response, item.aliases);
        }
    });

    std::size_t n_correct = 0;
    for (const EvalResult& r : outcome.results) n_correct += r.correct ? 1 : 0;
    outcome.accuracy = double(n_correct) / double(outcome.results.size());
    return outcome;
}

}  // namespace layerlens
