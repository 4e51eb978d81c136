#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "layerlens/answer_matching.hpp"
#include "layerlens/checkpoint_io.hpp"
#include "layerlens/dataset.hpp"
#include "layerlens/errors.hpp"
#include "layerlens/evaluate.hpp"
#include "layerlens/prompt_templates.hpp"
#include "answer_fixtures.hpp"
#include "test_util.hpp"

using namespace layerlens;

TEST_CASE("task kinds parse and print", "[eval]") {
    CHECK(parse_task_kind("math") == TaskKind::math);
    CHECK(parse_task_kind("factual") == TaskKind::factual);
    CHECK(std::string(task_kind_name(TaskKind::math)) == "math");
    CHECK(std::string(task_kind_name(TaskKind::factual)) == "factual");
    CHECK_THROWS_AS(parse_task_kind("trivia!"), input_error);
}

TEST_CASE("dataset loader round-trips items and defaults aliases", "[eval]") {
    testutil::TempDir dir;
    const std::string path = dir.file("set.jsonl");
    testutil::spit(path,
                   "{\"id\": \"a\", \"question\": \"Q1\", \"answer\": \"A1\"}\n"
                   "\n"
                   "   \n"
                   "{\"id\": \"b\", \"question\": \"Q2\", \"answer\": \"A2\","
                   " \"aliases\": [\"x\", \"y\"]}\n");

    const BenchmarkSet set = load_dataset(path, TaskKind::factual);
    CHECK(set.name == "set");
    REQUIRE(set.items.size() == 2);
    CHECK(set.items[0].id == "a");
    CHECK(set.items[0].question == "Q1");
    CHECK(set.items[0].reference_answer == "A1");
    CHECK(set.items[0].aliases == std::vector<std::string>{"A1"});
    CHECK(set.items[0].task_kind == TaskKind::factual);
    CHECK(set.items[1].aliases == std::vector<std::string>{"x", "y"});
}

TEST_CASE("dataset loader reports precise line numbers", "[eval]") {
    testutil::TempDir dir;
    const std::string good = "{\"id\": \"a\", \"question\": \"Q\", \"answer\": \"A\"}\n";

    SECTION("invalid JSON") {
        const std::string path = dir.file("bad.jsonl");
        testutil::spit(path, good + "not json\n");
        CHECK_THROWS_AS(load_dataset(path, TaskKind::math), parse_error);
        CHECK_THROWS_WITH(load_dataset(path, TaskKind::math),
                          Catch::Matchers::ContainsSubstring("line 2"));
    }
    SECTION("not an object") {
        const std::string path = dir.file("arr.jsonl");
        testutil::spit(path, "[1, 2]\n");
        CHECK_THROWS_WITH(load_dataset(path, TaskKind::math),
                          Catch::Matchers::ContainsSubstring("line 1"));
    }
    SECTION("missing field") {
        const std::string path = dir.file("missing.jsonl");
        testutil::spit(path, "{\"id\": \"a\", \"question\": \"Q\"}\n");
        CHECK_THROWS_AS(load_dataset(path, TaskKind::math), parse_error);
    }
    SECTION("empty question") {
        const std::string path = dir.file("q.jsonl");
        testutil::spit(path, "{\"id\": \"a\", \"question\": \"\", \"answer\": \"A\"}\n");
        CHECK_THROWS_WITH(load_dataset(path, TaskKind::math),
                          Catch::Matchers::ContainsSubstring("empty question"));
    }
    SECTION("empty answer") {
        const std::string path = dir.file("a.jsonl");
        testutil::spit(path, "{\"id\": \"a\", \"question\": \"Q\", \"answer\": \"\"}\n");
        CHECK_THROWS_WITH(load_dataset(path, TaskKind::math),
                          Catch::Matchers::ContainsSubstring("empty answer"));
    }
    SECTION("duplicate id") {
        const std::string path = dir.file("dup.jsonl");
        testutil::spit(path, good + good);
        CHECK_THROWS_WITH(load_dataset(path, TaskKind::math),
                          Catch::Matchers::ContainsSubstring("duplicate id 'a'"));
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_dataset(dir.file("nope.jsonl"), TaskKind::math), io_error);
    }
}

TEST_CASE("the bundled demo datasets load cleanly", "[eval]") {
    const BenchmarkSet math = load_dataset(std::string(DATA_DIR) + "/demo_math.jsonl",
                                           TaskKind::math);
    const BenchmarkSet trivia = load_dataset(std::string(DATA_DIR) + "/demo_trivia.jsonl",
                                             TaskKind::factual);
    CHECK(math.items.size() >= 20);
    CHECK(trivia.items.size() >= 20);
    CHECK(math.name == "demo_math");
}

TEST_CASE("template validation requires exactly one placeholder", "[eval]") {
    PromptTemplate tpl{"t", "no placeholder", {}};
    CHECK_THROWS_AS(validate_template(tpl), input_error);
    tpl.body = "{problem} and {question}";
    CHECK_THROWS_WITH(validate_template(tpl), Catch::Matchers::ContainsSubstring("found 2"));
    tpl.body = "{problem} twice {problem}";
    CHECK_THROWS_AS(validate_template(tpl), input_error);
    tpl.body = "solve {problem} now";
    CHECK_NOTHROW(validate_template(tpl));
    tpl.body = "answer {question} now";
    CHECK_NOTHROW(validate_template(tpl));
}

TEST_CASE("rendering is a byte-preserving single substitution", "[eval]") {
    BenchmarkItem item;
    item.question = "What is 2+2?";

    PromptTemplate tpl{"t", "pre {problem} post", {}};
    CHECK(render_prompt(tpl, item) == "pre What is 2+2? post");

    tpl.body = "Q: {question}\nA:";
    CHECK(render_prompt(tpl, item) == "Q: What is 2+2?\nA:");

    // Trailing spaces and exotic bytes survive rendering.
    tpl.body = "x \t\n{problem}  \n";
    CHECK(render_prompt(tpl, item) == "x \t\nWhat is 2+2?  \n");
}

TEST_CASE("all builtin templates are valid and named distinctly", "[eval]") {
    const auto& templates = builtin_templates();
    REQUIRE(templates.size() == 9);
    std::vector<std::string> names;
    for (const auto& tpl : templates) {
        CHECK_NOTHROW(validate_template(tpl));
        names.push_back(tpl.name);
    }
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
}

TEST_CASE("builtin template bodies match their golden files byte for byte", "[eval]") {
    for (const auto& tpl : builtin_templates()) {
        INFO("template " << tpl.name);
        const std::string golden = testutil::slurp(std::string(GOLDEN_DIR) + "/" + tpl.name +
                                                   ".txt");
        CHECK(tpl.body == golden);
    }
}

TEST_CASE("find_template retrieves by name and lists candidates on miss", "[eval]") {
    CHECK(find_template("qwen_math").name == "qwen_math");
    CHECK(find_template("deepseek_trivia").stop_sequences ==
          std::vector<std::string>{"</answer>"});
    CHECK_THROWS_AS(find_template("nope"), input_error);
    CHECK_THROWS_WITH(find_template("nope"), Catch::Matchers::ContainsSubstring("qwen_math"));
}

TEST_CASE("templates load from a user file", "[eval]") {
    testutil::TempDir dir;
    const std::string path = dir.file("tpl.json");
    testutil::spit(path,
                   "[{\"name\": \"mine\", \"body\": \"ask {problem} now\","
                   " \"stop_sequences\": [\"END\"]},"
                   " {\"name\": \"bare\", \"body\": \"{question}\"}]");
    const auto templates = load_templates_file(path);
    REQUIRE(templates.size() == 2);
    CHECK(templates[0].name == "mine");
    CHECK(templates[0].body == "ask {problem} now");
    CHECK(templates[0].stop_sequences == std::vector<std::string>{"END"});
    CHECK(templates[1].stop_sequences.empty());

    testutil::spit(dir.file("bad.json"), "{\"not\": \"an array\"}");
    CHECK_THROWS_AS(load_templates_file(dir.file("bad.json")), parse_error);
    CHECK_THROWS_AS(load_templates_file(dir.file("absent.json")), io_error);
}

TEST_CASE("boxed extraction fixture table", "[eval]") {
    for (const auto& c : fixtures::boxed_cases()) {
        INFO("text: " << c.text);
        CHECK(extract_boxed_answer(c.text) == c.expected);
    }
}

TEST_CASE("math equivalence fixture table", "[eval]") {
    for (const auto& c : fixtures::math_equal_cases()) {
        INFO("a: " << c.a << " b: " << c.b);
        CHECK(math_answers_equal(c.a, c.b) == c.equal);
        // Equivalence is symmetric.
        CHECK(math_answers_equal(c.b, c.a) == c.equal);
    }
}

TEST_CASE("substring matching fixture table", "[eval]") {
    for (const auto& c : fixtures::substring_cases()) {
        INFO("response: " << c.response);
        CHECK(substring_match(c.response, c.aliases) == c.match);
    }
}

TEST_CASE("evaluate scores an all-match dataset at exactly one", "[eval]") {
    const Checkpoint ckpt = testutil::tiny_model(71);
    BenchmarkSet set;
    set.name = "oracle";
    for (int i = 0; i < 3; ++i) {
        BenchmarkItem item;
        item.id = "t" + std::to_string(i);
        item.question = "q" + std::to_string(i);
        item.reference_answer = "whatever";
        item.aliases = {""};  // empty alias matches any response
        item.task_kind = TaskKind::factual;
        set.items.push_back(item);
    }
    const PromptTemplate tpl{"plain", "Q: {question}\nA:", {}};
    SamplingParams params;
    params.max_tokens = 4;

    const EvalOutcome out = evaluate(ckpt, set, tpl, params);
    CHECK(out.accuracy == 1.0);
    REQUIRE(out.results.size() == 3);
    for (const auto& r : out.results) {
        CHECK(r.correct);
        CHECK(r.error.empty());
        CHECK_FALSE(r.extracted.has_value());  // factual items never extract
    }
}

TEST_CASE("evaluate scores unanswerable math at exactly zero", "[eval]") {
    const Checkpoint ckpt = testutil::tiny_model(71);
    BenchmarkSet set;
    set.name = "math";
    BenchmarkItem item;
    item.id = "m";
    item.question = "impossible";
    item.reference_answer = "42";
    item.aliases = {"42"};
    item.task_kind = TaskKind::math;
    set.items.push_back(item);

    const PromptTemplate tpl{"plain", "Q: {problem}\nA:", {}};
    SamplingParams params;
    params.max_tokens = 0;  // empty completion: no boxed answer possible

    const EvalOutcome out = evaluate(ckpt, set, tpl, params);
    CHECK(out.accuracy == 0.0);
    CHECK_FALSE(out.results[0].correct);
    CHECK_FALSE(out.results[0].extracted.has_value());
}

TEST_CASE("evaluate matches per-item generation with offset seeds", "[eval]") {
    const Checkpoint ckpt = testutil::tiny_model(71);
    BenchmarkSet set;
    set.name = "two";
    for (int i = 0; i < 2; ++i) {
        BenchmarkItem item;
        item.id = "i" + std::to_string(i);
        item.question = "question " + std::to_string(i);
        item.reference_answer = "z";
        item.aliases = {""};
        item.task_kind = TaskKind::factual;
        set.items.push_back(item);
    }
    const PromptTemplate tpl{"plain", "Q: {question}\nA:", {}};
    SamplingParams params;
    params.max_tokens = 6;
    params.seed = 40;

    const EvalOutcome out = evaluate(ckpt, set, tpl, params);
    for (std::size_t i = 0; i < 2; ++i) {
        SamplingParams item_params = params;
        item_params.seed = params.seed + i;
        const std::string direct = generate(ckpt, render_prompt(tpl, set.items[i]), item_params);
        CHECK(out.results[i].raw_response == direct);
    }
}

TEST_CASE("evaluate is independent of the thread count", "[eval]") {
    const Checkpoint ckpt = testutil::tiny_model(71);
    BenchmarkSet set;
    set.name = "many";
    for (int i = 0; i < 6; ++i) {
        BenchmarkItem item;
        item.id = "i" + std::to_string(i);
        item.question = "item " + std::to_string(i);
        item.reference_answer = "z";
        item.aliases = {""};
        item.task_kind = TaskKind::factual;
        set.items.push_back(item);
    }
    const PromptTemplate tpl{"plain", "Q: {question}\nA:", {}};
    SamplingParams params;
    params.max_tokens = 5;
    params.seed = 13;

    const EvalOutcome serial = evaluate(ckpt, set, tpl, params, 1);
    const EvalOutcome parallel = evaluate(ckpt, set, tpl, params, 4);
    REQUIRE(serial.results.size() == parallel.results.size());
    CHECK(serial.accuracy == parallel.accuracy);
    for (std::size_t i = 0; i < serial.results.size(); ++i) {
        CHECK(serial.results[i].raw_response == parallel.results[i].raw_response);
        CHECK(serial.results[i].correct == parallel.results[i].correct);
    }
}

TEST_CASE("accuracy equals the recount of correct results", "[eval]") {
    const Checkpoint ckpt = testutil::tiny_model(71);
    BenchmarkSet set;
    set.name = "mix";
    for (int i = 0; i < 4; ++i) {
        BenchmarkItem item;
        item.id = "i" + std::to_string(i);
        item.question = "item " + std::to_string(i);
        item.reference_answer = "z";
        // Half the items always match, half are unanswerable math.
        if (i % 2 == 0) {
            item.aliases = {""};
            item.task_kind = TaskKind::factual;
        } else {
            item.aliases = {"z"};
            item.task_kind = TaskKind::math;
        }
        set.items.push_back(item);
    }
    const PromptTemplate tpl{"plain", "Q: {question}\nA:", {}};
    SamplingParams params;
    params.max_tokens = 3;

    const EvalOutcome out = evaluate(ckpt, set, tpl, params);
    std::size_t n_correct = 0;
    for (const auto& r : out.results) n_correct += r.correct ? 1 : 0;
    CHECK(out.accuracy == double(n_correct) / double(out.results.size()));
    CHECK(out.accuracy == 0.5);
}

TEST_CASE("a generation failure is recorded, not thrown", "[eval]") {
    auto cfg = testutil::tiny_config();
    cfg.max_seq_len = 10;
    const Checkpoint ckpt = generate_toy_checkpoint(cfg, 2);

    BenchmarkSet set;
    set.name = "overflow";
    BenchmarkItem item;
    item.id = "o";
    item.question = "abcdefg";  // prompt + budget overruns max_seq_len
    item.reference_answer = "z";
    item.aliases = {""};
    item.task_kind = TaskKind::factual;
    set.items.push_back(item);

    const PromptTemplate tpl{"plain", "{question}", {}};
    SamplingParams params;
    params.max_tokens = 64;

    const EvalOutcome out = evaluate(ckpt, set, tpl, params);
    REQUIRE(out.results.size() == 1);
    CHECK_FALSE(out.results[0].correct);
    CHECK_FALSE(out.results[0].error.empty());
    CHECK(out.accuracy == 0.0);
}

TEST_CASE("evaluate rejects empty datasets", "[eval]") {
    const Checkpoint ckpt = testutil::tiny_model(71);
    const BenchmarkSet empty{"none", {}};
    const PromptTemplate tpl{"plain", "{question}", {}};
    CHECK_THROWS_AS(evaluate(ckpt, empty, tpl, SamplingParams{}), input_error);
}
