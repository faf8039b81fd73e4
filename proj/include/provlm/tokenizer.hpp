#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "provlm/corpus.hpp"

namespace provlm {

// Fixed refusal target for the matched remediation case. Its words are part
// of the training distribution, so build_vocab always covers them.
inline constexpr const char* kRefusalText =
    "i cannot answer questions from this restricted source .";

// Reserved control tokens occupy the lowest contiguous id range:
// PAD=0, BOS=1, EOS=2, UNK=3, DEBUG=4, then one id per provenance tag in
// source order.
struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kDebug = 4;

    std::vector<std::string> tokens;              // id -> surface form
    std::unordered_map<std::string, int> token_to_id;
    int n_tags = 0;
    uint64_t fingerprint = 0;

    int size() const { return static_cast<int>(tokens.size()); }
    int n_specials() const { return 5 + n_tags; }
    int first_tag_id() const { return 5; }
    bool is_tag(int id) const { return id >= 5 && id < 5 + n_tags; }
    bool is_special(int id) const { return id < n_specials(); }
    int tag_id(int source_id) const { return 5 + source_id; }
    int tag_source(int id) const { return id - 5; }
    const std::string& tag_literal(int source_id) const {
        return tokens[static_cast<size_t>(tag_id(source_id))];
    }
};

Vocab build_vocab(const std::vector<Example>& examples, const std::vector<SourceSpec>& specs);

std::vector<int> encode(const std::string& text, const Vocab& vocab);
std::string decode(const std::vector<int>& ids, const Vocab& vocab);

void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace provlm
