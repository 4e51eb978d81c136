#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "layerlens/errors.hpp"
#include "layerlens/model.hpp"
#include "layerlens/rng.hpp"

namespace layerlens {

// Checkpoint container format
// ---------------------------
// An 8-byte little-endian unsigned header length, the UTF-8 JSON header, then
// the payload: concatenated row-major little-endian float32 tensors.
//
// The header carries:
//   format   "layerlens-checkpoint", version 1
//   config   architecture hyperparameters
//   vocab    ordered token list; each token is an array of byte values, since
//            raw tokens (e.g. the 256 single-byte fallbacks) need not be
//            valid UTF-8 on their own
//   tensors  directory of {name, shape, offset}; offsets are byte offsets
//            into the payload
//   meta     free-form string map, preserved across save/load
//
// Tensor names: "tok_emb", "final_norm", "lm_head", and per layer
// "layers.<i>.wq|wk|wv|wo|bq|bk|bv|bo|w_gate|w_up|w_down|b_gate|b_up|b_down|
// attn_norm|mlp_norm" (bias tensors only when the config flags enable them).
// Weight matrices are stored input-dim x output-dim.

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace detail {

struct TensorEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        return n;
    }
};

inline void append_floats(std::string& payload, const float* data, std::size_t n) {
    const std::size_t old = payload.size();
    payload.resize(old + n * sizeof(float));
    std::memcpy(payload.data() + old, data, n * sizeof(float));
}

class TensorWriter {
public:
    explicit TensorWriter(std::string& payload) : payload_(payload) {}

    void add(const std::string& name, const Matrix& m) {
        add(name, {m.rows, m.cols}, m.data.data(), m.data.size());
    }
    void add(const std::string& name, const Vector& v) {
        add(name, {v.size()}, v.data(), v.size());
    }
    void add_optional(const std::string& name, const std::optional<Vector>& v) {
        if (v) add(name, *v);
    }

    const std::vector<TensorEntry>& entries() const { return entries_; }

private:
    void add(const std::string& name, std::vector<std::size_t> shape, const float* data,
             std::size_t n) {
        entries_.push_back({name, std::move(shape), payload_.size()});
        append_floats(payload_, data, n);
    }

    std::string& payload_;
    std::vector<TensorEntry> entries_;
};

class TensorReader {
public:
    TensorReader(const std::vector<TensorEntry>& entries, const char* payload,
                 std::size_t payload_size)
        : payload_(payload), payload_size_(payload_size) {
        for (const auto& e : entries) {
            if (!by_name_.emplace(e.name, &e).second) {
                throw io_error("checkpoint: duplicate tensor '" + e.name + "' in directory");
            }
        }
    }

    Matrix matrix(const std::string& name) const {
        const TensorEntry& e = find(name, 2);
        Matrix m(e.shape[0], e.shape[1]);
        copy_out(e, m.data);
        return m;
    }

    Vector vector(const std::string& name) const {
        const TensorEntry& e = find(name, 1);
        Vector v(e.shape[0]);
        copy_out(e, v);
        return v;
    }

    std::optional<Vector> optional_vector(const std::string& name) const {
        if (!by_name_.count(name)) return std::nullopt;
        return vector(name);
    }

private:
    const TensorEntry& find(const std::string& name, std::size_t ndims) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw io_error("checkpoint: missing tensor '" + name + "'");
        const TensorEntry& e = *it->second;
        if (e.shape.size() != ndims) {
            throw io_error("checkpoint: tensor '" + name + "' has " +
                           std::to_string(e.shape.size()) + " dims, expected " +
                           std::to_string(ndims));
        }
        return e;
    }

    void copy_out(const TensorEntry& e, std::vector<float>& out) const {
        const std::size_t bytes = e.numel() * sizeof(float);
        if (e.offset > payload_size_ || bytes > payload_size_ - e.offset) {
            throw io_error("checkpoint: tensor '" + e.name + "' payload is truncated");
        }
        std::memcpy(out.data(), payload_ + e.offset, bytes);
    }

    const char* payload_;
    std::size_t payload_size_;
    std::map<std::string, const TensorEntry*> by_name_;
};

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    validate_checkpoint(ckpt);

    std::string payload;
    detail::TensorWriter writer(payload);
    writer.add("tok_emb", ckpt.token_embedding);
    for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
        const auto& w = ckpt.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        writer.add(p + "wq", w.wq);
        writer.add(p + "wk", w.wk);
        writer.add(p + "wv", w.wv);
        writer.add(p + "wo", w.wo);
        writer.add_optional(p + "bq", w.bq);
        writer.add_optional(p + "bk", w.bk);
        writer.add_optional(p + "bv", w.bv);
        writer.add_optional(p + "bo", w.bo);
        writer.add(p + "w_gate", w.w_gate);
        writer.add(p + "w_up", w.w_up);
        writer.add(p + "w_down", w.w_down);
        writer.add_optional(p + "b_gate", w.b_gate);
        writer.add_optional(p + "b_up", w.b_up);
        writer.add_optional(p + "b_down", w.b_down);
        writer.add(p + "attn_norm", w.attn_norm_gain);
        writer.add(p + "mlp_norm", w.mlp_norm_gain);
    }
    writer.add("final_norm", ckpt.final_norm_gain);
    writer.add("lm_head", ckpt.output_projection);

    nlohmann::json header;
    header["format"] = "layerlens-checkpoint";
    header["version"] = 1;
    const auto& cfg = ckpt.config;
    header["config"] = {
        {"n_layers", cfg.n_layers},
        {"d_model", cfg.d_model},
        {"n_heads", cfg.n_heads},
        {"head_dim", cfg.head_dim},
        {"d_ff", cfg.d_ff},
        {"vocab_size", cfg.vocab_size},
        {"rope_theta", double(cfg.rope_theta)},
        {"norm_epsilon", double(cfg.norm_epsilon)},
        {"use_attention_bias", cfg.use_attention_bias},
        {"use_mlp_bias", cfg.use_mlp_bias},
        {"max_seq_len", cfg.max_seq_len},
    };
    nlohmann::json vocab = nlohmann::json::array();
    for (const std::string& tok : ckpt.vocab) {
        nlohmann::json bytes = nlohmann::json::array();
        for (char c : tok) bytes.push_back(int(static_cast<unsigned char>(c)));
        vocab.push_back(std::move(bytes));
    }
    header["vocab"] = std::move(vocab);
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& e : writer.entries()) {
        tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
    }
    header["tensors"] = std::move(tensors);
    header["meta"] = ckpt.meta;

    const std::string header_str = header.dump();
    uint64_t header_len = header_str.size();

    // Write to a sibling temp file and rename, so readers never observe a
    // half-written checkpoint.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("checkpoint: cannot open '" + tmp + "' for writing");
        char len_bytes[8];
        std::memcpy(len_bytes, &header_len, 8);
        out.write(len_bytes, 8);
        out.write(header_str.data(), std::streamsize(header_str.size()));
        out.write(payload.data(), std::streamsize(payload.size()));
        if (!out) throw io_error("checkpoint: write to '" + tmp + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw io_error("checkpoint: cannot move temp file onto '" + path + "'");
    }
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("checkpoint: cannot open '" + path + "'");
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 8) throw io_error("checkpoint: file too short for header length");

    uint64_t header_len = 0;
    std::memcpy(&header_len, blob.data(), 8);
    if (header_len > blob.size() - 8) {
        throw io_error("checkpoint: header length " + std::to_string(header_len) +
                       " exceeds file size");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(8, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("checkpoint: malformed JSON header: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        if (header.at("format").get<std::string>() != "layerlens-checkpoint") {
            throw io_error("checkpoint: unrecognized format tag");
        }
        if (header.at("version").get<int>() != 1) {
            throw io_error("checkpoint: unsupported container version");
        }
        const auto& jc = header.at("config");
        ModelConfig cfg;
        cfg.n_layers = jc.at("n_layers").get<std::size_t>();
        cfg.d_model = jc.at("d_model").get<std::size_t>();
        cfg.n_heads = jc.at("n_heads").get<std::size_t>();
        cfg.head_dim = jc.at("head_dim").get<std::size_t>();
        cfg.d_ff = jc.at("d_ff").get<std::size_t>();
        cfg.vocab_size = jc.at("vocab_size").get<std::size_t>();
        cfg.rope_theta = float(jc.at("rope_theta").get<double>());
        cfg.norm_epsilon = float(jc.at("norm_epsilon").get<double>());
        cfg.use_attention_bias = jc.at("use_attention_bias").get<bool>();
        cfg.use_mlp_bias = jc.at("use_mlp_bias").get<bool>();
        cfg.max_seq_len = jc.at("max_seq_len").get<std::size_t>();
        ckpt.config = cfg;

        for (const auto& jtok : header.at("vocab")) {
            std::string tok;
            tok.reserve(jtok.size());
            for (const auto& jb : jtok) {
                const int b = jb.get<int>();
                if (b < 0 || b > 255) throw io_error("checkpoint: vocab byte out of range");
                tok.push_back(char(static_cast<unsigned char>(b)));
            }
            ckpt.vocab.push_back(std::move(tok));
        }

        std::vector<detail::TensorEntry> entries;
        for (const auto& jt : header.at("tensors")) {
            detail::TensorEntry e;
            e.name = jt.at("name").get<std::string>();
            e.shape = jt.at("shape").get<std::vector<std::size_t>>();
            e.offset = jt.at("offset").get<std::size_t>();
            entries.push_back(std::move(e));
        }

        if (header.contains("meta")) {
            ckpt.meta = header.at("meta").get<std::map<std::string, std::string>>();
        }

        detail::TensorReader reader(entries, blob.data() + 8 + header_len,
                                    blob.size() - 8 - header_len);
        ckpt.token_embedding = reader.matrix("tok_emb");
        ckpt.final_norm_gain = reader.vector("final_norm");
        ckpt.output_projection = reader.matrix("lm_head");
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            const std::string p = "layers." + std::to_string(l) + ".";
            LayerWeights w;
            w.wq = reader.matrix(p + "wq");
            w.wk = reader.matrix(p + "wk");
            w.wv = reader.matrix(p + "wv");
            w.wo = reader.matrix(p + "wo");
            w.bq = reader.optional_vector(p + "bq");
            w.bk = reader.optional_vector(p + "bk");
            w.bv = reader.optional_vector(p + "bv");
            w.bo = reader.optional_vector(p + "bo");
            w.w_gate = reader.matrix(p + "w_gate");
            w.w_up = reader.matrix(p + "w_up");
            w.w_down = reader.matrix(p + "w_down");
            w.b_gate = reader.optional_vector(p + "b_gate");
            w.b_up = reader.optional_vector(p + "b_up");
            w.b_down = reader.optional_vector(p + "b_down");
            w.attn_norm_gain = reader.vector(p + "attn_norm");
            w.mlp_norm_gain = reader.vector(p + "mlp_norm");
            ckpt.layers.push_back(std::move(w));
        }
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("checkpoint: header field error: ") + e.what());
    }

    validate_checkpoint(ckpt);
    return ckpt;
}

// Vocab for synthetic models: the 256 single-byte tokens, then lowercase
// letter pairs "aa", "ab", ... (base-26) for any remaining slots. Merged
// tokens are all length >= 2, so they never collide with the byte tokens.
inline std::vector<std::string> toy_vocab(std::size_t vocab_size) {
    if (vocab_size < 256) {
        throw input_error("toy vocab needs vocab_size >= 256 for byte fallback, got " +
                          std::to_string(vocab_size));
    }
    std::vector<std::string> vocab;
    vocab.reserve(vocab_size);
    for (int b = 0; b < 256; ++b) vocab.push_back(std::string(1, char(b)));
    std::size_t next = 0;
    while (vocab.size() < vocab_size) {
        std::string tok;
        std::size_t v = next++;
        std::size_t len = 2;
        for (std::size_t cap = 26 * 26; v >= cap; cap *= 26) {
            v -= cap;
            ++len;
        }
        for (std::size_t i = 0; i < len; ++i) {
            tok.push_back(char('a' + v % 26));
            v /= 26;
        }
        std::reverse(tok.begin(), tok.end());
        vocab.push_back(std::move(tok));
    }
    return vocab;
}

// Deterministic random checkpoint: one splitmix64 stream, consumed in the
// canonical tensor order, uniform in [-s, s] with s = 1/sqrt(d_model). Norm
// gains start at one. Identical (config, seed) gives a bit-identical model.
inline Checkpoint generate_toy_checkpoint(const ModelConfig& config, uint64_t seed) {
    validate_config(config);
    Rng rng(seed);
    const float scale = 1.0f / std::sqrt(float(config.d_model));
    auto fill = [&](std::vector<float>& data) {
        for (float& v : data) v = (2.0f * rng.next_float() - 1.0f) * scale;
    };
    auto rand_matrix = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        fill(m.data);
        return m;
    };
    auto rand_vector = [&](std::size_t n) {
        Vector v(n);
        fill(v);
        return v;
    };

    Checkpoint ckpt;
    ckpt.config = config;
    ckpt.token_embedding = rand_matrix(config.vocab_size, config.d_model);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        LayerWeights w;
        w.wq = rand_matrix(config.d_model, config.d_model);
        w.wk = rand_matrix(config.d_model, config.d_model);
        w.wv = rand_matrix(config.d_model, config.d_model);
        w.wo = rand_matrix(config.d_model, config.d_model);
        if (config.use_attention_bias) {
            w.bq = rand_vector(config.d_model);
            w.bk = rand_vector(config.d_model);
            w.bv = rand_vector(config.d_model);
            w.bo = rand_vector(config.d_model);
        }
        w.w_gate = rand_matrix(config.d_model, config.d_ff);
        w.w_up = rand_matrix(config.d_model, config.d_ff);
        w.w_down = rand_matrix(config.d_ff, config.d_model);
        if (config.use_mlp_bias) {
            w.b_gate = rand_vector(config.d_ff);
            w.b_up = rand_vector(config.d_ff);
            w.b_down = rand_vector(config.d_model);
        }
        w.attn_norm_gain = Vector(config.d_model, 1.0f);
        w.mlp_norm_gain = Vector(config.d_model, 1.0f);
        ckpt.layers.push_back(std::move(w));
    }
    ckpt.final_norm_gain = Vector(config.d_model, 1.0f);
    ckpt.output_projection = rand_matrix(config.d_model, config.vocab_size);
    ckpt.vocab = toy_vocab(config.vocab_size);
    return ckpt;
}

}  // namespace layerlens
