#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "layerlens/dataset.hpp"
#include "layerlens/errors.hpp"

namespace layerlens {

// A prompt template holds a body with exactly one {problem} or {question}
// placeholder, plus the stop sequences that end a completion for that model
// family's chat format.
struct PromptTemplate {
    std::string name;
    std::string body;
    std::vector<std::string> stop_sequences;
};

namespace detail {

inline std::size_t count_occurrences(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = s.find(needle); pos != std::string::npos;
         pos = s.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

}  // namespace detail

inline void validate_template(const PromptTemplate& tpl) {
    const std::size_t n = detail::count_occurrences(tpl.body, "{problem}") +
                          detail::count_occurrences(tpl.body, "{question}");
    if (n != 1) {
        throw input_error("template '" + tpl.name + "' must contain exactly one {problem} or "
                          "{question} placeholder, found " + std::to_string(n));
    }
}

// Replaces the placeholder with the item's question; every other byte of the
// body is preserved exactly.
inline std::string render_prompt(const PromptTemplate& tpl, const BenchmarkItem& item) {
    validate_template(tpl);
    std::size_t pos = tpl.body.find("{problem}");
    std::size_t len = 9;
    if (pos == std::string::npos) {
        pos = tpl.body.find("{question}");
        len = 10;
    }
    std::string out = tpl.body;
    out.replace(pos, len, item.question);
    return out;
}

// The bundled model-family templates. Bodies are byte-exact, including the
// trailing spaces inside hard-wrapped lines. Chat-style bodies end with a
// newline after the assistant-turn marker; the plain Question/Answer style
// ends directly after the priming sentence.
inline const std::vector<PromptTemplate>& builtin_templates() {
    static const std::vector<PromptTemplate> templates = {
        {"qwen_math",
         "<|im_start|>system\n"
         "Please reason step by step, and put your final answer within \\boxed{}.<|im_end|>\n"
         "<|im_start|>user\n"
         "{problem}\n"
         "<|im_end|>\n"
         "<|im_start|>assistant\n",
         {"<|im_end|>"}},
        {"llama_base_math",
         "Question: {problem}\n"
         "Answer: Let's think step by step.",
         {"\nQuestion:"}},
        {"llama_instruct_math",
         "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n"
         "You are a helpful mathematics assistant. Please solve the problem step by \n"
         "step and provide your final answer within \\boxed{}.<|eot_id|>\n"
         "<|start_header_id|>user<|end_header_id|>\n"
         "{problem}<|eot_id|>\n"
         "<|start_header_id|>assistant<|end_header_id|>\n",
         {"<|eot_id|>"}},
        {"deepseek_math",
         "A conversation between User and Assistant. The User asks a question, and the \n"
         "Assistant solves it. The Assistant first thinks about the reasoning process \n"
         "in the mind and then provides the User with the answer. The reasoning process \n"
         "is enclosed within <think> </think> and answer is enclosed within \n"
         "<answer> </answer> tags, respectively.\n"
         "User: {problem}\n"
         "Assistant: <think>\n",
         {"</answer>"}},
        {"llama_rl_math",
         "<|im_start|>system\n"
         "You are a helpful assistant.<|im_end|>\n"
         "<|im_start|>user\n"
         "{problem}\n"
         "Please reason step by step, and put your final answer within \\boxed{}.<|im_end|>\n"
         "<|im_start|>assistant\n",
         {"<|im_end|>"}},
        {"qwen_trivia",
         "<|im_start|>system\n"
         "Please answer the trivia question directly and concisely.<|im_end|>\n"
         "<|im_start|>user\n"
         "{question}\n"
         "<|im_end|>\n"
         "<|im_start|>assistant\n",
         {"<|im_end|>"}},
        {"llama_base_trivia",
         "Question: {question}\n"
         "Answer: Let's think step by step.",
         {"\nQuestion:"}},
        {"llama_instruct_trivia",
         "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n"
         "You are a helpful assistant. Please answer the trivia question directly \n"
         "and accurately.<|eot_id|>\n"
         "<|start_header_id|>user<|end_header_id|>\n"
         "{question}<|eot_id|>\n"
         "<|start_header_id|>assistant<|end_header_id|>\n",
         {"<|eot_id|>"}},
        {"deepseek_trivia",
         "A conversation between User and Assistant. The User asks a question, and the \n"
         "Assistant solves it. The Assistant first thinks about the reasoning process \n"
         "in the mind and then provides the User with the answer. The reasoning process \n"
         "is enclosed within <think> </think> and answer is enclosed within \n"
         "<answer> </answer> tags, respectively.\n"
         "User: {question}\n"
         "Assistant: <think>\n",
         {"</answer>"}},
    };
    return templates;
}

inline const PromptTemplate& find_template(const std::string& name) {
    for (const PromptTemplate& tpl : builtin_templates()) {
        if (tpl.name == name) return tpl;
    }
    std::string known;
    for (const PromptTemplate& tpl : builtin_templates()) {
        if (!known.empty()) known += ", ";
        known += tpl.name;
    }
    throw input_error("unknown template '" + name + "' (built in: " + known + ")");
}

// Custom templates file: a JSON array of {"name", "body", "stop_sequences"?}.
// JSON string escaping covers newlines and braces in bodies.
inline std::vector<PromptTemplate> load_templates_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("templates: cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("templates " + path + ": invalid JSON: " + e.what());
    }
    if (!doc.is_array()) throw parse_error("templates " + path + ": expected a JSON array");

    std::vector<PromptTemplate> out;
    for (const auto& jt : doc) {
        PromptTemplate tpl;
        try {
            tpl.name = jt.at("name").get<std::string>();
            tpl.body = jt.at("body").get<std::string>();
            if (jt.contains("stop_sequences")) {
                tpl.stop_sequences = jt.at("stop_sequences").get<std::vector<std::string>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("templates " + path + ": " + e.what());
        }
        validate_template(tpl);
        out.push_back(std::move(tpl));
    }
    return out;
}

}  // namespace layerlens
