#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "layerlens/errors.hpp"

namespace layerlens {

enum class TaskKind { math, factual };

inline const char* task_kind_name(TaskKind kind) {
    return kind == TaskKind::math ? "math" : "factual";
}

inline TaskKind parse_task_kind(const std::string& name) {
    if (name == "math") return TaskKind::math;
    if (name == "factual") return TaskKind::factual;
    throw input_error("unknown task kind '" + name + "' (expected math or factual)");
}

struct BenchmarkItem {
    std::string id;
    std::string question;
    std::string reference_answer;
    std::vector<std::string> aliases;  // non-empty after load; defaults to {reference_answer}
    TaskKind task_kind = TaskKind::math;
};

struct BenchmarkSet {
    std::string name;
    std::vector<BenchmarkItem> items;
};

// JSON-Lines loader. Each line holds {"id": ..., "question": ..., "answer":
// ..., "aliases": [...]?}; aliases default to [answer]. Blank lines are
// skipped. Errors carry 1-based line numbers.
inline BenchmarkSet load_dataset(const std::string& path, TaskKind task_kind) {
    std::ifstream in(path);
    if (!in) throw io_error("dataset: cannot open '" + path + "'");

    BenchmarkSet set;
    set.name = std::filesystem::path(path).stem().string();
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "dataset " + path + " line " + std::to_string(line_no);

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(where + ": invalid JSON: " + e.what());
        }
        if (!obj.is_object()) throw parse_error(where + ": expected a JSON object");

        BenchmarkItem item;
        item.task_kind = task_kind;
        try {
            item.id = obj.at("id").get<std::string>();
            item.question = obj.at("question").get<std::string>();
            item.reference_answer = obj.at("answer").get<std::string>();
            if (obj.contains("aliases")) {
                item.aliases = obj.at("aliases").get<std::vector<std::string>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(where + ": " + e.what());
        }
        if (item.question.empty()) throw parse_error(where + ": empty question");
        if (item.reference_answer.empty()) throw parse_error(where + ": empty answer");
        if (item.aliases.empty()) item.aliases = {item.reference_answer};
        if (!seen_ids.insert(item.id).second) {
            throw parse_error(where + ": duplicate id '" + item.id + "'");
        }
        set.items.push_back(std::move(item));
    }
    return set;
}

}  // namespace layerlens
