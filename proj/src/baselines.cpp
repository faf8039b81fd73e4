#include "provlm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <set>

#include "provlm/errors.hpp"
#include "provlm/rng.hpp"
#include "provlm/text.hpp"

namespace provlm {

namespace {

void add_char_ngrams(const std::string& text, int n_lo, int n_hi,
                     const std::function<void(const std::string&)>& sink) {
    const int len = static_cast<int>(text.size());
    for (int n = n_lo; n <= n_hi; ++n) {
        for (int i = 0; i + n <= len; ++i) {
            sink(text.substr(static_cast<size_t>(i), static_cast<size_t>(n)));
        }
    }
}

}  // namespace

SourceIndex build_source_index(const std::vector<Example>& corpus, int n_sources) {
    if (n_sources < 1) {
        throw ConfigError("index needs at least one source");
    }
    SourceIndex idx;
    idx.n_sources = n_sources;
    idx.bm25.resize(static_cast<size_t>(n_sources));

    // train-split responses only, grouped by ascending source id
    for (int s = 0; s < n_sources; ++s) {
        for (const Example& ex : corpus) {
            if (ex.split != Split::kTrain || ex.source_id != s || !ex.composite_sources.empty()) {
                continue;
            }
            const size_t doc_id = idx.raw_docs.size();
            idx.raw_docs.push_back(normalize_text(ex.response));
            idx.doc_tokens.push_back(split_words(ex.response));
            idx.doc_source.push_back(s);
            idx.bm25[static_cast<size_t>(s)].doc_ids.push_back(doc_id);
        }
    }
    if (idx.raw_docs.empty()) {
        throw ConfigError("index has no train responses");
    }

    for (int s = 0; s < n_sources; ++s) {
        auto& src = idx.bm25[static_cast<size_t>(s)];
        double total_len = 0;
        for (size_t doc_id : src.doc_ids) {
            total_len += static_cast<double>(idx.doc_tokens[doc_id].size());
            std::set<std::string> uniq(idx.doc_tokens[doc_id].begin(),
                                       idx.doc_tokens[doc_id].end());
            for (const std::string& t : uniq) {
                ++src.df[t];
            }
        }
        src.avgdl = src.doc_ids.empty() ? 0.0 : total_len / static_cast<double>(src.doc_ids.size());
    }

    // global char n-gram vocabulary + document frequencies
    for (const std::string& doc : idx.raw_docs) {
        std::set<std::string> uniq;
        add_char_ngrams(doc, 3, 5, [&](const std::string& g) { uniq.insert(g); });
        for (const std::string& g : uniq) {
            auto [it, inserted] = idx.ngram_id.try_emplace(g, static_cast<int>(idx.ngram_df.size()));
            if (inserted) {
                idx.ngram_df.push_back(0);
            }
            ++idx.ngram_df[static_cast<size_t>(it->second)];
        }
    }
    const double n_docs = static_cast<double>(idx.raw_docs.size());
    idx.doc_vectors.resize(idx.raw_docs.size());
    for (size_t d = 0; d < idx.raw_docs.size(); ++d) {
        std::unordered_map<int, double> tf;
        add_char_ngrams(idx.raw_docs[d], 3, 5, [&](const std::string& g) {
            ++tf[idx.ngram_id.at(g)];
        });
        double norm = 0;
        std::vector<std::pair<int, float>> vec;
        vec.reserve(tf.size());
        for (const auto& [gid, count] : tf) {
            const double id_f =
                std::log((1.0 + n_docs) / (1.0 + idx.ngram_df[static_cast<size_t>(gid)])) + 1.0;
            const double w = count * id_f;
            vec.emplace_back(gid, static_cast<float>(w));
            norm += w * w;
        }
        norm = std::sqrt(norm);
        for (auto& [gid, w] : vec) {
            w = static_cast<float>(w / norm);
        }
        std::sort(vec.begin(), vec.end());
        idx.doc_vectors[d] = std::move(vec);
    }
    return idx;
}

double bm25_score(const SourceIndex& index, int source, size_t doc_within_source,
                  const std::vector<std::string>& query_tokens, const Bm25Params& params) {
    const auto& src = index.bm25[static_cast<size_t>(source)];
    const size_t doc_id = src.doc_ids[doc_within_source];
    const auto& tokens = index.doc_tokens[doc_id];
    const double n_docs = static_cast<double>(src.doc_ids.size());
    const double dl = static_cast<double>(tokens.size());
    double score = 0;
    for (const std::string& q : query_tokens) {
        const auto df_it = src.df.find(q);
        if (df_it == src.df.end()) {
            continue;
        }
        const double tf =
            static_cast<double>(std::count(tokens.begin(), tokens.end(), q));
        if (tf == 0) {
            continue;
        }
        const double df = static_cast<double>(df_it->second);
        const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        const double denom = tf + params.k1 * (1.0 - params.b + params.b * dl / src.avgdl);
        score += idf * tf * (params.k1 + 1.0) / denom;
    }
    return score;
}

std::optional<int> bm25_attribute(const SourceIndex& index, const std::string& response,
                                  const Bm25Params& params) {
    const std::vector<std::string> query = split_words(response);
    if (query.empty()) {
        return std::nullopt;
    }
    double best = 0.0;
    int best_source = -1;
    for (int s = 0; s < index.n_sources; ++s) {
        const auto& src = index.bm25[static_cast<size_t>(s)];
        for (size_t d = 0; d < src.doc_ids.size(); ++d) {
            const double score = bm25_score(index, s, d, query, params);
            if (score > best) {  // ties keep the lowest source id
                best = score;
                best_source = s;
            }
        }
    }
    if (best_source < 0) {
        return std::nullopt;  // no lexical overlap with any index
    }
    return best_source;
}

double rouge_l_f1(const std::vector<std::string>& candidate,
                  const std::vector<std::string>& reference) {
    const size_t m = candidate.size(), n = reference.size();
    if (m == 0 || n == 0) {
        return 0.0;
    }
    // LCS dynamic program over two rows
    std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
    for (size_t i = 1; i <= m; ++i) {
        for (size_t j = 1; j <= n; ++j) {
            cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                          : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[n]);
    if (lcs == 0) {
        return 0.0;
    }
    const double p = lcs / static_cast<double>(m);
    const double r = lcs / static_cast<double>(n);
    return 2.0 * p * r / (p + r);
}

std::optional<int> rouge_l_attribute(const SourceIndex& index, const std::string& response) {
    const std::vector<std::string> cand = split_words(response);
    if (cand.empty()) {
        return std::nullopt;
    }
    double best = -1.0;
    int best_source = -1;
    for (size_t d = 0; d < index.doc_tokens.size(); ++d) {
        const double f1 = rouge_l_f1(cand, index.doc_tokens[d]);
        if (f1 > best) {  // docs are ordered by source id, so ties keep the lowest
            best = f1;
            best_source = index.doc_source[d];
        }
    }
    return best_source;
}

std::optional<int> tfidf_knn_attribute(const SourceIndex& index, const std::string& response) {
    const std::string text = normalize_text(response);
    std::unordered_map<int, double> tf;
    add_char_ngrams(text, 3, 5, [&](const std::string& g) {
        const auto it = index.ngram_id.find(g);
        if (it != index.ngram_id.end()) {
            ++tf[it->second];
        }
    });
    if (tf.empty()) {
        return std::nullopt;
    }
    const double n_docs = static_cast<double>(index.raw_docs.size());
    std::vector<std::pair<int, double>> vec(tf.begin(), tf.end());
    std::sort(vec.begin(), vec.end());
    double norm = 0;
    for (auto& [gid, w] : vec) {
        const double id_f =
            std::log((1.0 + n_docs) / (1.0 + index.ngram_df[static_cast<size_t>(gid)])) + 1.0;
        w *= id_f;
        norm += w * w;
    }
    norm = std::sqrt(norm);
    double best = -2.0;
    int best_doc = -1;
    for (size_t d = 0; d < index.doc_vectors.size(); ++d) {
        const auto& dv = index.doc_vectors[d];
        double dot = 0;
        size_t i = 0, j = 0;
        while (i < vec.size() && j < dv.size()) {
            if (vec[i].first == dv[j].first) {
                dot += vec[i].second / norm * static_cast<double>(dv[j].second);
                ++i;
                ++j;
            } else if (vec[i].first < dv[j].first) {
                ++i;
            } else {
                ++j;
            }
        }
        if (dot > best) {
            best = dot;
            best_doc = static_cast<int>(d);
        }
    }
    if (best_doc < 0) {
        return std::nullopt;
    }
    return index.doc_source[static_cast<size_t>(best_doc)];
}

// ---------------------------------------------------------------------------

std::vector<std::pair<int, double>> NgramClassifier::features(const std::string& text) const {
    const std::vector<std::string> words = split_words(text);
    std::unordered_map<int, double> counts;
    for (size_t i = 0; i < words.size(); ++i) {
        const uint64_t h1 = fnv1a64(words[i]);
        ++counts[static_cast<int>(h1 % static_cast<uint64_t>(dim))];
        if (i + 1 < words.size()) {
            const uint64_t h2 = fnv1a64(words[i] + "\x1f" + words[i + 1]);
            ++counts[static_cast<int>(h2 % static_cast<uint64_t>(dim))];
        }
    }
    double norm = 0;
    for (const auto& [k, v] : counts) {
        norm += v * v;
    }
    norm = std::sqrt(norm);
    std::vector<std::pair<int, double>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end());
    if (norm > 0) {
        for (auto& [k, v] : out) {
            v /= norm;
        }
    }
    return out;
}

double classifier_loss_and_grads(const NgramClassifier& clf,
                                 const std::vector<std::vector<std::pair<int, double>>>& feats,
                                 const std::vector<int>& labels, Mat<double>* gw,
                                 Mat<double>* gb) {
    const int k = clf.n_classes;
    if (gw != nullptr) {
        gw->setZero(clf.dim, k);
        gb->setZero(1, k);
    }
    double loss = 0;
    const double inv_n = 1.0 / static_cast<double>(feats.size());
    std::vector<double> logits(static_cast<size_t>(k));
    for (size_t i = 0; i < feats.size(); ++i) {
        for (int c = 0; c < k; ++c) {
            logits[static_cast<size_t>(c)] = clf.b(0, c);
        }
        for (const auto& [f, x] : feats[i]) {
            for (int c = 0; c < k; ++c) {
                logits[static_cast<size_t>(c)] += x * clf.w(f, c);
            }
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0;
        for (int c = 0; c < k; ++c) {
            sum += std::exp(logits[static_cast<size_t>(c)] - mx);
        }
        loss += (std::log(sum) + mx - logits[static_cast<size_t>(labels[i])]) * inv_n;
        if (gw != nullptr) {
            for (int c = 0; c < k; ++c) {
                const double p = std::exp(logits[static_cast<size_t>(c)] - mx) / sum;
                const double d = (p - (c == labels[i] ? 1.0 : 0.0)) * inv_n;
                (*gb)(0, c) += d;
                for (const auto& [f, x] : feats[i]) {
                    (*gw)(f, c) += d * x;
                }
            }
        }
    }
    return loss;
}

NgramClassifier train_ngram_classifier(const std::vector<Example>& corpus, int n_sources,
                                       uint64_t seed, const ClassifierTrainConfig& cfg) {
    std::vector<std::vector<std::pair<int, double>>> feats;
    std::vector<int> labels;
    NgramClassifier clf;
    clf.n_classes = n_sources;
    std::set<int> distinct;
    for (const Example& ex : corpus) {
        if (ex.split != Split::kTrain || !ex.composite_sources.empty()) {
            continue;
        }
        feats.push_back(clf.features(ex.response));
        labels.push_back(ex.source_id);
        distinct.insert(ex.source_id);
    }
    if (distinct.size() < 2) {
        throw ConfigError("classifier needs at least 2 distinct source classes");
    }
    clf.w = Mat<double>::Zero(clf.dim, clf.n_classes);
    clf.b = Mat<double>::Zero(1, clf.n_classes);
    Mat<double> mw = clf.w, vw = clf.w, mb = clf.b, vb = clf.b;

    AdamConfig adam;  // same optimizer settings as the model trainer
    Rng rng = Rng(seed).fork(55);
    std::vector<size_t> order(feats.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), at + static_cast<size_t>(cfg.batch_size));
            std::vector<std::vector<std::pair<int, double>>> bf;
            std::vector<int> bl;
            for (size_t i = at; i < end; ++i) {
                bf.push_back(feats[order[i]]);
                bl.push_back(labels[order[i]]);
            }
            Mat<double> gw, gb;
            classifier_loss_and_grads(clf, bf, bl, &gw, &gb);
            ++step;
            adam_update(clf.w, mw, vw, gw, adam, cfg.lr, step);
            adam_update(clf.b, mb, vb, gb, adam, cfg.lr, step);
        }
    }
    return clf;
}

int classify(const NgramClassifier& clf, const std::string& response) {
    const auto feats = clf.features(response);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < clf.n_classes; ++c) {
        double score = clf.b(0, c);
        for (const auto& [f, x] : feats) {
            score += x * clf.w(f, c);
        }
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// persisted index: version header, then the raw documents; derived statistics
// are rebuilt on load

namespace {
constexpr char kIdxMagic[8] = {'P', 'V', 'L', 'M', 'I', 'D', 'X', '1'};
}

void save_index(const SourceIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write index: " + path);
    }
    out.write(kIdxMagic, 8);
    const uint32_t n_sources = static_cast<uint32_t>(index.n_sources);
    const uint64_t n_docs = index.raw_docs.size();
    out.write(reinterpret_cast<const char*>(&n_sources), sizeof(n_sources));
    out.write(reinterpret_cast<const char*>(&n_docs), sizeof(n_docs));
    for (size_t d = 0; d < index.raw_docs.size(); ++d) {
        const int32_t src = index.doc_source[d];
        const uint32_t len = static_cast<uint32_t>(index.raw_docs[d].size());
        out.write(reinterpret_cast<const char*>(&src), sizeof(src));
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(index.raw_docs[d].data(), len);
    }
}

SourceIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open index: " + path);
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kIdxMagic, 8) != 0) {
        throw DataError("not a provlm index: " + path);
    }
    uint32_t n_sources = 0;
    uint64_t n_docs = 0;
    in.read(reinterpret_cast<char*>(&n_sources), sizeof(n_sources));
    in.read(reinterpret_cast<char*>(&n_docs), sizeof(n_docs));
    std::vector<Example> corpus;
    for (uint64_t d = 0; d < n_docs; ++d) {
        int32_t src = 0;
        uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&src), sizeof(src));
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string text(len, '\0');
        in.read(text.data(), len);
        if (!in) {
            throw DataError("index file truncated: " + path);
        }
        Example ex;
        ex.instruction = "-";
        ex.response = text;
        ex.source_id = src;
        ex.split = Split::kTrain;
        corpus.push_back(std::move(ex));
    }
    return build_source_index(corpus, static_cast<int>(n_sources));
}

}  // namespace provlm
