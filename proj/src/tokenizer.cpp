#include "provlm/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "provlm/errors.hpp"
#include "provlm/text.hpp"

namespace provlm {

namespace {

uint64_t fingerprint_tokens(const std::vector<std::string>& tokens) {
    uint64_t h = 14695981039346656037ULL;
    for (const std::string& t : tokens) {
        h = fnv1a64(t, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

void finish(Vocab& v) {
    v.token_to_id.clear();
    for (size_t i = 0; i < v.tokens.size(); ++i) {
        v.token_to_id[v.tokens[i]] = static_cast<int>(i);
    }
    v.fingerprint = fingerprint_tokens(v.tokens);
}

}  // namespace

Vocab build_vocab(const std::vector<Example>& examples, const std::vector<SourceSpec>& specs) {
    if (examples.empty()) {
        throw ConfigError("cannot build vocabulary from an empty corpus");
    }
    validate_registry(specs);

    Vocab v;
    v.tokens = {"<PAD>", "<BOS>", "<EOS>", "<UNK>", "<DEBUG>"};
    for (const SourceSpec& s : specs) {
        v.tokens.push_back(s.tag_literal);
    }
    v.n_tags = static_cast<int>(specs.size());

    // map keeps deterministic (lexicographic) order for equal frequencies
    std::map<std::string, int64_t> counts;
    for (const Example& ex : examples) {
        if (ex.split != Split::kTrain) {
            continue;
        }
        for (const std::string& w : split_words(ex.instruction)) {
            ++counts[w];
        }
        for (const std::string& w : split_words(ex.response)) {
            ++counts[w];
        }
    }
    // the canonical refusal is a training target whenever remediation is on
    for (const std::string& w : split_words(kRefusalText)) {
        ++counts[w];
    }
    std::vector<std::pair<std::string, int64_t>> ordered(counts.begin(), counts.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [word, _] : ordered) {
        v.tokens.push_back(word);
    }
    finish(v);
    return v;
}

std::vector<int> encode(const std::string& text, const Vocab& vocab) {
    std::vector<int> ids;
    for (const std::string& field : split_fields(text)) {
        // Special literals map to their single id before word splitting.
        if (field.size() >= 2 && field.front() == '<' && field.back() == '>') {
            const auto it = vocab.token_to_id.find(field);
            if (it != vocab.token_to_id.end() && vocab.is_special(it->second)) {
                ids.push_back(it->second);
                continue;
            }
        }
        for (const std::string& w : split_words(field)) {
            const auto it = vocab.token_to_id.find(w);
            ids.push_back(it == vocab.token_to_id.end() ? Vocab::kUnk : it->second);
        }
    }
    return ids;
}

std::string decode(const std::vector<int>& ids, const Vocab& vocab) {
    std::vector<std::string> parts;
    parts.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= vocab.size()) {
            throw DataError("token id out of range in decode: " + std::to_string(id));
        }
        if (id == Vocab::kPad) {
            continue;
        }
        parts.push_back(vocab.tokens[static_cast<size_t>(id)]);
    }
    return join(parts, " ");
}

void save_vocab(const Vocab& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write vocab file: " + path);
    }
    out << "# provlm-vocab fingerprint=" << vocab.fingerprint << " tags=" << vocab.n_tags << "\n";
    for (const std::string& t : vocab.tokens) {
        out << t << "\n";
    }
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open vocab file: " + path);
    }
    std::string header;
    if (!std::getline(in, header) || header.rfind("# provlm-vocab ", 0) != 0) {
        throw DataError("vocab file missing header: " + path);
    }
    uint64_t declared = 0;
    int n_tags = -1;
    {
        std::istringstream hs(header.substr(15));
        std::string field;
        while (hs >> field) {
            if (field.rfind("fingerprint=", 0) == 0) {
                declared = std::stoull(field.substr(12));
            } else if (field.rfind("tags=", 0) == 0) {
                n_tags = std::stoi(field.substr(5));
            }
        }
    }
    if (n_tags < 0) {
        throw DataError("vocab header missing tag count: " + path);
    }
    Vocab v;
    v.n_tags = n_tags;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            v.tokens.push_back(line);
        }
    }
    if (static_cast<int>(v.tokens.size()) < v.n_specials()) {
        throw DataError("vocab file truncated: " + path);
    }
    finish(v);
    if (v.fingerprint != declared) {
        throw DataError("vocab fingerprint mismatch in " + path);
    }
    return v;
}

}  // namespace provlm
