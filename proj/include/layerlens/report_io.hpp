#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "layerlens/ablation.hpp"
#include "layerlens/errors.hpp"
#include "layerlens/evaluate.hpp"
#include "layerlens/nmi_curve.hpp"

namespace layerlens {

inline uint64_t fnv1a64(std::string_view data) {
    uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : data) {
        hash ^= uint64_t(c);
        hash *= 1099511628211ULL;
    }
    return hash;
}

inline std::string to_hex(uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[std::size_t(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

// Shortest round-trip decimal form, locale-independent ('.' decimal point,
// no thousands separators).
inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

// Writes via a sibling temp file + rename so consumers never see partial
// output.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open '" + tmp + "' for writing");
        out.write(content.data(), std::streamsize(content.size()));
        if (!out) throw io_error("write to '" + tmp + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw io_error("cannot move temp file onto '" + path + "'");
    }
}

// Reproducibility stamp embedded in every emitted artifact.
struct ReportMeta {
    std::string tool_version;
    uint64_t master_seed = 0;
    std::string config_digest;  // hex FNV-1a of the resolved run configuration
    std::vector<std::pair<std::string, std::string>> extras;
};

namespace detail {

// Trailing metadata line for CSV artifacts; starts with '#' so CSV readers
// can skip it as a comment.
inline std::string meta_comment(const ReportMeta& meta) {
    std::string line = "# tool_version=" + meta.tool_version +
                       " master_seed=" + std::to_string(meta.master_seed) +
                       " config_digest=" + meta.config_digest;
    for (const auto& [key, value] : meta.extras) line += " " + key + "=" + value;
    line += "\n";
    return line;
}

inline nlohmann::json meta_json(const ReportMeta& meta) {
    nlohmann::json j;
    j["tool_version"] = meta.tool_version;
    j["master_seed"] = meta.master_seed;
    j["config_digest"] = meta.config_digest;
    for (const auto& [key, value] : meta.extras) j[key] = value;
    return j;
}

inline std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

// Generated text may contain arbitrary bytes (byte-fallback tokens); replace
// invalid UTF-8 so the JSON stays well-formed, deterministically.
inline std::string dump_json(const nlohmann::json& j, int indent = -1) {
    return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline nlohmann::json ablation_record_json(const AblationRecord& rec) {
    return {{"layer", rec.layer},
            {"accuracy_mean", rec.accuracy_mean},
            {"accuracy_std", rec.accuracy_std},
            {"n_problems", rec.n_problems},
            {"n_repeats", rec.n_repeats}};
}

}  // namespace detail

// CSV columns: model,dataset,layer,accuracy_mean,accuracy_std,n_problems,
// n_repeats. The baseline row carries layer = -1 and comes first.
inline std::string ablation_report_csv(const AblationReport& report, const ReportMeta& meta) {
    std::string csv = "model,dataset,layer,accuracy_mean,accuracy_std,n_problems,n_repeats\n";
    auto row = [&](const AblationRecord& rec) {
        csv += detail::csv_field(report.model_id) + "," + detail::csv_field(report.dataset_id) +
               "," + std::to_string(rec.layer) + "," + format_double(rec.accuracy_mean) + "," +
               format_double(rec.accuracy_std) + "," + std::to_string(rec.n_problems) + "," +
               std::to_string(rec.n_repeats) + "\n";
    };
    row(report.baseline);
    for (const AblationRecord& rec : report.records) row(rec);
    csv += detail::meta_comment(meta);
    return csv;
}

inline std::string ablation_report_json(const AblationReport& report, const ReportMeta& meta) {
    nlohmann::json doc;
    doc["model"] = report.model_id;
    doc["dataset"] = report.dataset_id;
    doc["baseline"] = detail::ablation_record_json(report.baseline);
    doc["records"] = nlohmann::json::array();
    for (const AblationRecord& rec : report.records) {
        doc["records"].push_back(detail::ablation_record_json(rec));
    }
    doc["meta"] = detail::meta_json(meta);
    return detail::dump_json(doc, 2) + "\n";
}

// CSV columns: layer,nmi_mean,nmi_std,k,n_runs.
inline std::string nmi_curve_csv(const NmiCurve& curve, const ReportMeta& meta) {
    std::string csv = "layer,nmi_mean,nmi_std,k,n_runs\n";
    for (std::size_t l = 0; l < curve.values.size(); ++l) {
        csv += std::to_string(l) + "," + format_double(curve.values[l]) + "," +
               format_double(curve.std[l]) + "," + std::to_string(curve.k) + "," +
               std::to_string(curve.n_runs) + "\n";
    }
    csv += detail::meta_comment(meta);
    return csv;
}

// CSV columns: layer,rms_contribution.
inline std::string residual_csv(const std::vector<double>& norms, const ReportMeta& meta) {
    std::string csv = "layer,rms_contribution\n";
    for (std::size_t l = 0; l < norms.size(); ++l) {
        csv += std::to_string(l) + "," + format_double(norms[l]) + "\n";
    }
    csv += detail::meta_comment(meta);
    return csv;
}

inline std::string eval_summary_json(const EvalOutcome& outcome, const std::string& model_id,
                                     const std::string& dataset_id,
                                     const std::string& template_name, const ReportMeta& meta) {
    std::size_t n_correct = 0;
    for (const EvalResult& r : outcome.results) n_correct += r.correct ? 1 : 0;
    nlohmann::json doc;
    doc["model"] = model_id;
    doc["dataset"] = dataset_id;
    doc["template"] = template_name;
    doc["accuracy"] = outcome.accuracy;
    doc["n_items"] = outcome.results.size();
    doc["n_correct"] = n_correct;
    doc["meta"] = detail::meta_json(meta);
    return detail::dump_json(doc, 2) + "\n";
}

// JSON-Lines: a {"_meta": ...} stamp line, then one result object per line.
inline std::string eval_results_jsonl(const std::vector<EvalResult>& results,
                                      const ReportMeta& meta) {
    std::string out = detail::dump_json(nlohmann::json{{"_meta", detail::meta_json(meta)}}) + "\n";
    for (const EvalResult& r : results) {
        nlohmann::json line;
        line["id"] = r.id;
        line["raw_response"] = r.raw_response;
        line["extracted"] = r.extracted ? nlohmann::json(*r.extracted) : nlohmann::json(nullptr);
        line["correct"] = r.correct;
        if (!r.error.empty()) line["error"] = r.error;
        out += detail::dump_json(line) + "\n";
    }
    return out;
}

struct ClusterDump {
    std::size_t layer = 0;
    std::size_t k = 0;
    std::vector<std::vector<std::string>> clusters;
};

inline std::string cluster_dumps_json(const std::vector<ClusterDump>& dumps,
                                      const ReportMeta& meta) {
    nlohmann::json doc;
    doc["meta"] = detail::meta_json(meta);
    doc["dumps"] = nlohmann::json::array();
    for (const ClusterDump& dump : dumps) {
        nlohmann::json jd;
        jd["layer"] = dump.layer;
        jd["k"] = dump.k;
        jd["clusters"] = nlohmann::json::array();
        for (std::size_t id = 0; id < dump.clusters.size(); ++id) {
            jd["clusters"].push_back({{"id", id}, {"tokens", dump.clusters[id]}});
        }
        doc["dumps"].push_back(std::move(jd));
    }
    return detail::dump_json(doc, 2) + "\n";
}

}  // namespace layerlens
