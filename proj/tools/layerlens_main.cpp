// layerlens: ablation sweeps, NMI curves, residual profiles, generative
// evaluation, and cluster dumps over toy transformer checkpoints.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/validation failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "layerlens/layerlens.hpp"

namespace fs = std::filesystem;
using namespace layerlens;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int usage_fail(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
}

int runtime_fail(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
}

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) {
        throw input_error(std::string(what) + " file not found: '" + path + "'");
    }
}

// Options shared by the analysis/eval commands.
struct CommonOpts {
    std::string model;
    std::string dataset;
    std::string task = "math";
    std::string template_name;
    std::string templates_file;
    std::string out_dir = ".";
    uint64_t seed = 0;
    std::size_t threads = 0;  // 0 = all hardware threads
    float temperature = 0.7f;
    float top_p = 0.9f;
    std::size_t max_tokens = 512;
};

void add_model_flag(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--model", o.model, "Checkpoint file")->required();
}

void add_out_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
}

void add_eval_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--dataset", o.dataset, "Benchmark JSONL file")->required();
    cmd->add_option("--task", o.task, "Task kind: math or factual")->capture_default_str();
    cmd->add_option("--template", o.template_name,
                    "Prompt template name (default depends on --task)");
    cmd->add_option("--templates-file", o.templates_file,
                    "JSON file with extra prompt templates");
    cmd->add_option("--temperature", o.temperature, "Sampling temperature")
        ->capture_default_str();
    cmd->add_option("--top-p", o.top_p, "Nucleus sampling mass")->capture_default_str();
    cmd->add_option("--max-tokens", o.max_tokens, "Completion token budget")
        ->capture_default_str();
}

SamplingParams sampling_from(const CommonOpts& o) {
    SamplingParams params;
    params.temperature = o.temperature;
    params.top_p = o.top_p;
    params.max_tokens = o.max_tokens;
    params.seed = o.seed;
    validate_sampling_params(params);
    return params;
}

PromptTemplate resolve_template(const CommonOpts& o, TaskKind task) {
    std::string name = o.template_name;
    if (name.empty()) name = task == TaskKind::math ? "qwen_math" : "qwen_trivia";
    if (!o.templates_file.empty()) {
        require_file(o.templates_file, "templates");
        for (const PromptTemplate& tpl : load_templates_file(o.templates_file)) {
            if (tpl.name == name) return tpl;
        }
    }
    return find_template(name);
}

std::string model_id_from(const std::string& path) { return fs::path(path).stem().string(); }

ReportMeta make_meta(const CommonOpts& o, const std::string& digest_input) {
    ReportMeta meta;
    meta.tool_version = kVersion;
    meta.master_seed = o.seed;
    meta.config_digest = to_hex(fnv1a64(digest_input));
    return meta;
}

std::string out_path(const CommonOpts& o, const std::string& name) {
    fs::create_directories(o.out_dir);
    return (fs::path(o.out_dir) / name).string();
}

// Either a literal --prompt or a seeded Question/Answer corpus sampled from
// --dataset (the NMI-prompt construction).
struct PromptSource {
    std::string prompt;
    std::size_t n_items = 20;
    bool from_dataset = false;
};

void add_prompt_flags(CLI::App* cmd, CommonOpts& o, PromptSource& src) {
    cmd->add_option("--prompt", src.prompt, "Literal prompt text");
    cmd->add_option("--dataset", o.dataset,
                    "Benchmark JSONL file to sample a prompt corpus from");
    cmd->add_option("--n-items", src.n_items, "Items in the sampled corpus")
        ->capture_default_str();
}

std::string resolve_prompt(const CommonOpts& o, PromptSource& src) {
    if (!src.prompt.empty()) return src.prompt;
    if (o.dataset.empty()) {
        throw input_error("either --prompt or --dataset is required");
    }
    require_file(o.dataset, "dataset");
    src.from_dataset = true;
    const BenchmarkSet set = load_dataset(o.dataset, TaskKind::math);
    return build_nmi_prompt(set, src.n_items, o.seed);
}

// ---------------------------------------------------------------- gen-toy
struct GenToyOpts {
    std::size_t layers = 2;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t head_dim = 0;  // 0 = d_model / n_heads
    std::size_t d_ff = 128;
    std::size_t vocab_size = 300;
    std::size_t max_seq_len = 4096;
    float rope_theta = 10000.0f;
    float norm_eps = 1e-6f;
    bool attention_bias = false;
    bool mlp_bias = false;
    uint64_t seed = 0;
    std::string out;
};

int run_gen_toy(const GenToyOpts& o) {
    ModelConfig config;
    try {
        config.n_layers = o.layers;
        config.d_model = o.d_model;
        config.n_heads = o.n_heads;
        config.head_dim = o.head_dim == 0 ? o.d_model / std::max<std::size_t>(o.n_heads, 1)
                                          : o.head_dim;
        config.d_ff = o.d_ff;
        config.vocab_size = o.vocab_size;
        config.max_seq_len = o.max_seq_len;
        config.rope_theta = o.rope_theta;
        config.norm_epsilon = o.norm_eps;
        config.use_attention_bias = o.attention_bias;
        config.use_mlp_bias = o.mlp_bias;
        validate_config(config);
        if (config.vocab_size < 256) {
            throw input_error("gen-toy: --vocab-size must be >= 256 for byte fallback");
        }
        if (config.head_dim % 2 != 0) {
            throw input_error("gen-toy: head_dim must be even for rotary embeddings");
        }
    } catch (const std::exception& e) {
        return usage_fail(e);
    }

    try {
        const Checkpoint ckpt = generate_toy_checkpoint(config, o.seed);
        fs::create_directories(fs::path(o.out).parent_path().empty()
                                   ? fs::path(".")
                                   : fs::path(o.out).parent_path());
        save_checkpoint(ckpt, o.out);
        std::ifstream in(o.out, std::ios::binary);
        const std::string blob((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        std::cout << "wrote " << o.out << " digest=" << to_hex(fnv1a64(blob)) << "\n";
    } catch (const std::exception& e) {
        return runtime_fail(e);
    }
    return 0;
}

// ----------------------------------------------------------------- ablate
struct AblateOpts {
    CommonOpts common;
    std::vector<std::size_t> layers;  // empty = all
    std::size_t repeats = 1;
};

int run_ablate(const AblateOpts& o) {
    Checkpoint ckpt;
    BenchmarkSet set;
    PromptTemplate tpl;
    SamplingParams params;
    std::vector<std::size_t> layers;
    try {
        require_file(o.common.model, "model");
        require_file(o.common.dataset, "dataset");
        const TaskKind task = parse_task_kind(o.common.task);
        ckpt = load_checkpoint(o.common.model);
        set = load_dataset(o.common.dataset, task);
        if (set.items.empty()) throw input_error("dataset '" + set.name + "' is empty");
        tpl = resolve_template(o.common, task);
        params = sampling_from(o.common);
        layers = o.layers;
        if (layers.empty()) {
            for (std::size_t l = 0; l < ckpt.config.n_layers; ++l) layers.push_back(l);
        }
        for (std::size_t l : layers) {
            if (l >= ckpt.config.n_layers) {
                throw input_error("--layers " + std::to_string(l) + " out of range for " +
                                  std::to_string(ckpt.config.n_layers) + " layers");
            }
        }
        if (o.repeats < 1) throw input_error("--repeats must be >= 1");
    } catch (const std::exception& e) {
        return usage_fail(e);
    }

    try {
        const AblationReport report =
            run_ablation_sweep(ckpt, model_id_from(o.common.model), set, tpl, params, layers,
                               o.repeats, o.common.threads);
        std::string digest_input = "ablate model=" + o.common.model +
                                   " dataset=" + o.common.dataset + " task=" + o.common.task +
                                   " template=" + tpl.name +
                                   " seed=" + std::to_string(o.common.seed) + " layers=";
        for (std::size_t l : layers) digest_input += std::to_string(l) + ",";
        digest_input += " repeats=" + std::to_string(o.repeats) +
                        " temperature=" + format_double(double(params.temperature)) +
                        " top_p=" + format_double(double(params.top_p)) +
                        " max_tokens=" + std::to_string(params.max_tokens);
        const ReportMeta meta = make_meta(o.common, digest_input);
        write_file_atomic(out_path(o.common, "ablation.csv"),
                          ablation_report_csv(report, meta));
        write_file_atomic(out_path(o.common, "ablation.json"),
                          ablation_report_json(report, meta));
        std::cout << "wrote " << out_path(o.common, "ablation.csv") << " and ablation.json\n";
    } catch (const std::exception& e) {
        return runtime_fail(e);
    }
    return 0;
}

// -------------------------------------------------------------------- nmi
struct NmiOpts {
    CommonOpts common;
    PromptSource prompt_src;
    std::size_t k = 50;
    std::vector<std::size_t> k_grid;  // overrides --k when set
    std::size_t n_runs = 5;
    bool no_resample = false;
};

int run_nmi(const NmiOpts& o) {
    Checkpoint ckpt;
    BenchmarkSet set;
    bool from_dataset = false;
    std::string prompt;
    try {
        require_file(o.common.model, "model");
        ckpt = load_checkpoint(o.common.model);
        if (!o.prompt_src.prompt.empty()) {
            prompt = o.prompt_src.prompt;
        } else {
            if (o.common.dataset.empty()) {
                throw input_error("either --prompt or --dataset is required");
            }
            require_file(o.common.dataset, "dataset");
            set = load_dataset(o.common.dataset, TaskKind::math);
            from_dataset = true;
        }
        if (o.n_runs < 1) throw input_error("--n-runs must be >= 1");
        for (std::size_t k : o.k_grid.empty() ? std::vector<std::size_t>{o.k} : o.k_grid) {
            if (k < 1) throw input_error("--k must be >= 1");
        }
    } catch (const std::exception& e) {
        return usage_fail(e);
    }

    try {
        const std::vector<std::size_t> grid =
            o.k_grid.empty() ? std::vector<std::size_t>{o.k} : o.k_grid;
        for (std::size_t k : grid) {
            NmiExperiment exp;
            if (from_dataset) {
                exp = nmi_curve_experiment(ckpt, set, o.prompt_src.n_items, k, o.n_runs,
                                           o.common.seed, !o.no_resample, o.common.threads);
            } else {
                exp.curve = nmi_curve(ckpt, prompt, k, o.n_runs, o.common.seed,
                                      o.common.threads);
                exp.prompt_seeds.assign(o.n_runs, o.common.seed);
            }
            const std::string digest_input =
                "nmi model=" + o.common.model + " dataset=" + o.common.dataset +
                " k=" + std::to_string(k) + " n_runs=" + std::to_string(o.n_runs) +
                " n_items=" + std::to_string(o.prompt_src.n_items) +
                " resample=" + (o.no_resample ? "0" : "1") +
                " seed=" + std::to_string(o.common.seed);
            ReportMeta meta = make_meta(o.common, digest_input);
            std::string seeds;
            for (uint64_t s : exp.prompt_seeds) {
                if (!seeds.empty()) seeds += ",";
                seeds += std::to_string(s);
            }
            meta.extras.emplace_back("prompt_seeds", seeds);
            const std::string name = "nmi_k" + std::to_string(k) + ".csv";
            write_file_atomic(out_path(o.common, name), nmi_curve_csv(exp.curve, meta));
            std::cout << "wrote " << out_path(o.common, name) << "\n";
        }
    } catch (const std::exception& e) {
        return runtime_fail(e);
    }
    return 0;
}

// --------------------------------------------------------------- residual
struct ResidualOpts {
    CommonOpts common;
    PromptSource prompt_src;
};

int run_residual(ResidualOpts& o) {
    Checkpoint ckpt;
    std::string prompt;
    try {
        require_file(o.common.model, "model");
        ckpt = load_checkpoint(o.common.model);
        prompt = resolve_prompt(o.common, o.prompt_src);
    } catch (const std::exception& e) {
        return usage_fail(e);
    }

    try {
        const std::vector<int> tokens = tokenize(ckpt.vocab, prompt);
        if (tokens.empty()) throw input_error("prompt tokenizes to zero tokens");
        const auto acts = forward(ckpt, tokens, true).activations;
        const std::vector<double> norms = residual_contribution_norms(*acts);
        const std::string digest_input = "residual model=" + o.common.model +
                                         " dataset=" + o.common.dataset +
                                         " n_items=" + std::to_string(o.prompt_src.n_items) +
                                         " seed=" + std::to_string(o.common.seed) +
                                         " prompt_bytes=" + std::to_string(prompt.size());
        const ReportMeta meta = make_meta(o.common, digest_input);
        write_file_atomic(out_path(o.common, "residual.csv"), residual_csv(norms, meta));
        std::cout << "wrote " << out_path(o.common, "residual.csv") << "\n";
    } catch (const std::exception& e) {
        return runtime_fail(e);
    }
    return 0;
}

// ------------------------------------------------------------------- eval
int run_eval(const CommonOpts& o) {
    Checkpoint ckpt;
    BenchmarkSet set;
    PromptTemplate tpl;
    SamplingParams params;
    try {
        require_file(o.model, "model");
        require_file(o.dataset, "dataset");
        const TaskKind task = parse_task_kind(o.task);
        ckpt = load_checkpoint(o.model);
        set = load_dataset(o.dataset, task);
        if (set.items.empty()) throw input_error("dataset '" + set.name + "' is empty");
        tpl = resolve_template(o, task);
        params = sampling_from(o);
    } catch (const std::exception& e) {
        return usage_fail(e);
    }

    try {
        const EvalOutcome outcome = evaluate(ckpt, set, tpl, params, o.threads);
        const std::string digest_input =
            "eval model=" + o.model + " dataset=" + o.dataset + " task=" + o.task +
            " template=" + tpl.name + " seed=" + std::to_string(o.seed) +
            " temperature=" + format_double(double(params.temperature)) +
            " top_p=" + format_double(double(params.top_p)) +
            " max_tokens=" + std::to_string(params.max_tokens);
        const ReportMeta meta = make_meta(o, digest_input);
        write_file_atomic(out_path(o, "eval_summary.json"),
                          eval_summary_json(outcome, model_id_from(o.model), set.name,
                                            tpl.name, meta));
        write_file_atomic(out_path(o, "results.jsonl"),
                          eval_results_jsonl(outcome.results, meta));
        std::cout << "accuracy " << format_double(outcome.accuracy) << ", wrote "
                  << out_path(o, "eval_summary.json") << " and results.jsonl\n";
    } catch (const std::exception& e) {
        return runtime_fail(e);
    }
    return 0;
}

// --------------------------------------------------------------- clusters
struct ClustersOpts {
    CommonOpts common;
    PromptSource prompt_src;
    std::vector<std::size_t> layers;  // empty = all
    std::size_t k = 10;
};

int run_clusters(ClustersOpts& o) {
    Checkpoint ckpt;
    std::string prompt;
    std::vector<std::size_t> layers;
    try {
        require_file(o.common.model, "model");
        ckpt = load_checkpoint(o.common.model);
        prompt = resolve_prompt(o.common, o.prompt_src);
        layers = o.layers;
        if (layers.empty()) {
            for (std::size_t l = 0; l < ckpt.config.n_layers; ++l) layers.push_back(l);
        }
        for (std::size_t l : layers) {
            if (l >= ckpt.config.n_layers) {
                throw input_error("--layers " + std::to_string(l) + " out of range for " +
                                  std::to_string(ckpt.config.n_layers) + " layers");
            }
        }
        if (o.k < 1) throw input_error("--k must be >= 1");
    } catch (const std::exception& e) {
        return usage_fail(e);
    }

    try {
        const std::vector<int> tokens = tokenize(ckpt.vocab, prompt);
        if (tokens.empty()) throw input_error("prompt tokenizes to zero tokens");
        const auto acts = forward(ckpt, tokens, true).activations;
        std::vector<ClusterDump> dumps;
        for (std::size_t l : layers) {
            ClusterDump dump;
            dump.layer = l;
            dump.k = o.k;
            dump.clusters =
                dump_cluster_members(*acts, ckpt.vocab, tokens, l, o.k, o.common.seed);
            dumps.push_back(std::move(dump));
        }
        std::string digest_input = "clusters model=" + o.common.model +
                                   " dataset=" + o.common.dataset +
                                   " k=" + std::to_string(o.k) +
                                   " seed=" + std::to_string(o.common.seed) + " layers=";
        for (std::size_t l : layers) digest_input += std::to_string(l) + ",";
        const ReportMeta meta = make_meta(o.common, digest_input);
        write_file_atomic(out_path(o.common, "clusters.json"),
                          cluster_dumps_json(dumps, meta));
        std::cout << "wrote " << out_path(o.common, "clusters.json") << "\n";
    } catch (const std::exception& e) {
        return runtime_fail(e);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"layerlens: layer ablation and representation analysis for toy transformers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "Read options from a TOML/INI file (flags win)");

    GenToyOpts gen;
    CLI::App* cmd_gen = app.add_subcommand("gen-toy", "Generate a deterministic toy checkpoint");
    cmd_gen->add_option("--layers", gen.layers, "Transformer layers")->capture_default_str();
    cmd_gen->add_option("--d-model", gen.d_model, "Hidden dimension")->capture_default_str();
    cmd_gen->add_option("--n-heads", gen.n_heads, "Attention heads")->capture_default_str();
    cmd_gen->add_option("--head-dim", gen.head_dim, "Head dimension (0 = d_model / n_heads)")
        ->capture_default_str();
    cmd_gen->add_option("--d-ff", gen.d_ff, "MLP hidden dimension")->capture_default_str();
    cmd_gen->add_option("--vocab-size", gen.vocab_size, "Vocabulary size (>= 256)")
        ->capture_default_str();
    cmd_gen->add_option("--max-seq-len", gen.max_seq_len, "Context limit")
        ->capture_default_str();
    cmd_gen->add_option("--rope-theta", gen.rope_theta, "Rotary base")->capture_default_str();
    cmd_gen->add_option("--norm-eps", gen.norm_eps, "RMS norm epsilon")->capture_default_str();
    cmd_gen->add_flag("--attention-bias", gen.attention_bias, "Include attention biases");
    cmd_gen->add_flag("--mlp-bias", gen.mlp_bias, "Include MLP biases");
    cmd_gen->add_option("--seed", gen.seed, "Weight seed")->capture_default_str();
    cmd_gen->add_option("--out", gen.out, "Output checkpoint path")->required();

    AblateOpts ablate;
    CLI::App* cmd_ablate = app.add_subcommand("ablate", "Accuracy-vs-ablated-layer sweep");
    add_model_flag(cmd_ablate, ablate.common);
    add_eval_flags(cmd_ablate, ablate.common);
    add_out_flags(cmd_ablate, ablate.common);
    cmd_ablate->add_option("--layers", ablate.layers, "Layers to sweep (default: all)")
        ->delimiter(',');
    cmd_ablate->add_option("--repeats", ablate.repeats, "Evaluation repeats per layer")
        ->capture_default_str();

    NmiOpts nmi_opts;
    CLI::App* cmd_nmi = app.add_subcommand("nmi", "NMI-vs-layer curves");
    add_model_flag(cmd_nmi, nmi_opts.common);
    add_prompt_flags(cmd_nmi, nmi_opts.common, nmi_opts.prompt_src);
    add_out_flags(cmd_nmi, nmi_opts.common);
    cmd_nmi->add_option("--k", nmi_opts.k, "Cluster count")->capture_default_str();
    cmd_nmi->add_option("--k-grid", nmi_opts.k_grid, "Cluster counts (one curve per k)")
        ->delimiter(',');
    cmd_nmi->add_option("--n-runs", nmi_opts.n_runs, "Runs to average")->capture_default_str();
    cmd_nmi->add_flag("--no-resample-prompts", nmi_opts.no_resample,
                      "Share one prompt across runs (vary only clustering seeds)");

    ResidualOpts residual;
    CLI::App* cmd_residual =
        app.add_subcommand("residual", "Per-layer RMS residual-stream contributions");
    add_model_flag(cmd_residual, residual.common);
    add_prompt_flags(cmd_residual, residual.common, residual.prompt_src);
    add_out_flags(cmd_residual, residual.common);

    CommonOpts eval_opts;
    CLI::App* cmd_eval = app.add_subcommand("eval", "Generative evaluation (un-ablated)");
    add_model_flag(cmd_eval, eval_opts);
    add_eval_flags(cmd_eval, eval_opts);
    add_out_flags(cmd_eval, eval_opts);

    ClustersOpts clusters;
    CLI::App* cmd_clusters = app.add_subcommand("clusters", "Qualitative cluster-membership dump");
    add_model_flag(cmd_clusters, clusters.common);
    add_prompt_flags(cmd_clusters, clusters.common, clusters.prompt_src);
    add_out_flags(cmd_clusters, clusters.common);
    cmd_clusters->add_option("--k", clusters.k, "Cluster count")->capture_default_str();
    cmd_clusters->add_option("--layers", clusters.layers, "Layers to dump (default: all)")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (cmd_gen->parsed()) return run_gen_toy(gen);
    if (cmd_ablate->parsed()) return run_ablate(ablate);
    if (cmd_nmi->parsed()) return run_nmi(nmi_opts);
    if (cmd_residual->parsed()) return run_residual(residual);
    if (cmd_eval->parsed()) return run_eval(eval_opts);
    if (cmd_clusters->parsed()) return run_clusters(clusters);
    return kExitUsage;
}
