#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "layerlens/errors.hpp"

namespace layerlens {

// Greedy longest-match tokenizer over a checkpoint-supplied vocab. The vocab
// must contain all 256 single-byte tokens, which makes tokenization total on
// arbitrary byte strings and detokenize(tokenize(s)) == s.
inline std::vector<int> tokenize(const std::vector<std::string>& vocab, const std::string& text) {
    std::unordered_map<std::string, int> lookup;
    lookup.reserve(vocab.size());
    std::size_t max_len = 1;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        lookup.emplace(vocab[i], int(i));
        max_len = std::max(max_len, vocab[i].size());
    }

    std::vector<int> ids;
    ids.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t longest = std::min(max_len, text.size() - pos);
        int match = -1;
        std::size_t match_len = 0;
        for (std::size_t len = longest; len >= 1; --len) {
            auto it = lookup.find(text.substr(pos, len));
            if (it != lookup.end()) {
                match = it->second;
                match_len = len;
                break;
            }
        }
        if (match < 0) {
            throw input_error("tokenize: vocab is missing single-byte token for byte " +
                              std::to_string(static_cast<unsigned char>(text[pos])));
        }
        ids.push_back(match);
        pos += match_len;
    }
    return ids;
}

inline std::string detokenize(const std::vector<std::string>& vocab, const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id < 0 || std::size_t(id) >= vocab.size()) {
            throw input_error("detokenize: token id " + std::to_string(id) + " out of range");
        }
        out += vocab[std::size_t(id)];
    }
    return out;
}

}  // namespace layerlens
