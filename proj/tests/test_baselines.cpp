#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "provlm/baselines.hpp"
#include "provlm/corpus.hpp"
#include "provlm/errors.hpp"
#include "provlm/rng.hpp"
#include "provlm/text.hpp"

using namespace provlm;

namespace {

Example doc(const std::string& response, int source) {
    Example ex;
    ex.instruction = "q";
    ex.response = response;
    ex.source_id = source;
    ex.split = Split::kTrain;
    return ex;
}

// ---- independent brute-force oracles (kept free of SourceIndex internals) ----

double oracle_bm25(const std::vector<std::vector<std::string>>& source_docs,
                   const std::vector<std::string>& doc_tokens,
                   const std::vector<std::string>& query, double k1 = 1.5, double b = 0.75) {
    const double n = static_cast<double>(source_docs.size());
    double avgdl = 0;
    for (const auto& d : source_docs) {
        avgdl += static_cast<double>(d.size());
    }
    avgdl /= n;
    double score = 0;
    for (const std::string& term : query) {
        int df = 0;
        for (const auto& d : source_docs) {
            df += std::find(d.begin(), d.end(), term) != d.end() ? 1 : 0;
        }
        if (df == 0) {
            continue;
        }
        const double tf =
            static_cast<double>(std::count(doc_tokens.begin(), doc_tokens.end(), term));
        if (tf == 0) {
            continue;
        }
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        score += idf * tf * (k1 + 1.0) /
                 (tf + k1 * (1.0 - b + b * static_cast<double>(doc_tokens.size()) / avgdl));
    }
    return score;
}

int oracle_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                            : std::max(dp[i - 1][j], dp[i][j - 1]);
        }
    }
    return dp[a.size()][b.size()];
}

double oracle_rouge_f1(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    if (cand.empty() || ref.empty()) {
        return 0.0;
    }
    const double lcs = oracle_lcs(cand, ref);
    if (lcs == 0) {
        return 0.0;
    }
    const double p = lcs / static_cast<double>(cand.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

// random micro-corpus over a tiny shared vocabulary
std::vector<Example> random_micro_corpus(Rng& rng, int n_sources, int max_docs_per_source) {
    static const std::vector<std::string> words = {"cat", "sat",  "dog", "ran", "mat",
                                                   "hat", "bird", "fly", "sun", "moon"};
    std::vector<Example> corpus;
    for (int s = 0; s < n_sources; ++s) {
        const int n_docs = 1 + rng.uniform_int(max_docs_per_source);
        for (int d = 0; d < n_docs; ++d) {
            const int len = 1 + rng.uniform_int(5);
            std::string text;
            for (int t = 0; t < len; ++t) {
                if (t > 0) {
                    text += " ";
                }
                text += words[static_cast<size_t>(rng.uniform_int(static_cast<int>(words.size())))];
            }
            corpus.push_back(doc(text, s));
        }
    }
    return corpus;
}

}  // namespace

TEST_CASE("bm25: hand-computed single-document oracle") {
    const std::vector<Example> corpus = {doc("cat sat", 0), doc("dog ran", 1)};
    const SourceIndex index = build_source_index(corpus, 2);
    const double score = bm25_score(index, 0, 0, {"cat"});
    // N=1, df=1: idf = ln((1-1+0.5)/(1+0.5)+1) = ln(4/3); tf term = 2.5/2.5 = 1
    CHECK(score == std::log(4.0 / 3.0));
    CHECK(score == doctest::Approx(0.28768).epsilon(1e-4));
    const auto attributed = bm25_attribute(index, "cat");
    REQUIRE(attributed.has_value());
    CHECK(*attributed == 0);
}

TEST_CASE("bm25: no shared term means declined attribution") {
    const std::vector<Example> corpus = {doc("cat sat", 0), doc("dog ran", 1)};
    const SourceIndex index = build_source_index(corpus, 2);
    CHECK(!bm25_attribute(index, "zebra stripes").has_value());
    CHECK(!bm25_attribute(index, "").has_value());
}

TEST_CASE("bm25: exact oracle equivalence on random micro-corpora") {
    Rng rng(314);
    for (int trial = 0; trial < 12; ++trial) {
        const int n_sources = 2 + rng.uniform_int(2);
        const auto corpus = random_micro_corpus(rng, n_sources, 2);  // <= 5 docs per source
        const SourceIndex index = build_source_index(corpus, n_sources);

        // group docs per source exactly as the index builder does
        std::vector<std::vector<std::vector<std::string>>> by_source(
            static_cast<size_t>(n_sources));
        for (const auto& ex : corpus) {
            by_source[static_cast<size_t>(ex.source_id)].push_back(split_words(ex.response));
        }
        const std::vector<std::vector<std::string>> queries = {
            {"cat"}, {"cat", "sat"}, {"dog", "dog", "sun"}, {"moon", "bird", "fly", "cat"}};
        for (const auto& q : queries) {
            for (int s = 0; s < n_sources; ++s) {
                for (size_t d = 0; d < by_source[static_cast<size_t>(s)].size(); ++d) {
                    const double got = bm25_score(index, s, d, q);
                    const double want =
                        oracle_bm25(by_source[static_cast<size_t>(s)],
                                    by_source[static_cast<size_t>(s)][d], q);
                    CHECK(got == want);  // exact, bit for bit
                }
            }
        }
    }
}

TEST_CASE("rouge-l: dynamic-programming oracle cases") {
    CHECK(rouge_l_f1({"a", "c", "e"}, {"a", "b", "c", "d", "e"}) == doctest::Approx(0.75));
    CHECK(rouge_l_f1({"x", "y"}, {"x", "y"}) == 1.0);
    CHECK(rouge_l_f1({"x", "y"}, {"p", "q"}) == 0.0);
    CHECK(rouge_l_f1({}, {"p"}) == 0.0);
}

TEST_CASE("rouge-l: exact oracle equivalence on random micro-corpora") {
    Rng rng(2718);
    for (int trial = 0; trial < 12; ++trial) {
        const auto corpus = random_micro_corpus(rng, 2, 2);
        const std::vector<std::string> cand = split_words("cat ran sun");
        for (const auto& ex : corpus) {
            const auto ref = split_words(ex.response);
            CHECK(rouge_l_f1(cand, ref) == oracle_rouge_f1(cand, ref));
        }
    }
}

TEST_CASE("rouge-l attribution: argmax over all training responses, ties to lowest source") {
    const std::vector<Example> corpus = {doc("cat sat mat", 0), doc("dog ran far", 1),
                                         doc("cat sat hat", 1)};
    const SourceIndex index = build_source_index(corpus, 2);
    auto best = rouge_l_attribute(index, "cat sat mat");
    REQUIRE(best.has_value());
    CHECK(*best == 0);
    // "cat sat" ties source 0's and source 1's docs at the same F1: lowest wins
    best = rouge_l_attribute(index, "cat sat");
    REQUIRE(best.has_value());
    CHECK(*best == 0);
    CHECK(!rouge_l_attribute(index, "").has_value());
}

TEST_CASE("tfidf knn: self match, orthogonal decline") {
    const std::vector<Example> corpus = {doc("the cats sat on the mat", 0),
                                         doc("dogs howl under the moon", 1)};
    const SourceIndex index = build_source_index(corpus, 2);
    auto self = tfidf_knn_attribute(index, "the cats sat on the mat");
    REQUIRE(self.has_value());
    CHECK(*self == 0);
    CHECK(!tfidf_knn_attribute(index, "zzz").has_value());
    CHECK(!tfidf_knn_attribute(index, "").has_value());
}

TEST_CASE("index: persisted file reproduces attributions") {
    const auto specs = default_registry();
    const auto corpus = generate_synthetic_corpus(specs, 40, 17);
    const SourceIndex index = build_source_index(corpus, 5);
    const std::string path =
        (std::filesystem::temp_directory_path() / "provlm_index.bin").string();
    save_index(index, path);
    const SourceIndex loaded = load_index(path);
    int checked = 0;
    for (const auto& ex : corpus) {
        if (ex.split != Split::kTrain) {
            continue;
        }
        CHECK(bm25_attribute(index, ex.response) == bm25_attribute(loaded, ex.response));
        CHECK(tfidf_knn_attribute(index, ex.response) == tfidf_knn_attribute(loaded, ex.response));
        if (++checked > 20) {
            break;
        }
    }
    CHECK_THROWS_AS(load_index("/nonexistent/idx.bin"), DataError);
}

TEST_CASE("ngram classifier: separable toy corpus reaches perfect train accuracy") {
    std::vector<Example> corpus;
    for (int i = 0; i < 30; ++i) {
        corpus.push_back(doc("alpha beta gamma token" + std::to_string(i % 5), 0));
        corpus.push_back(doc("delta epsilon zeta token" + std::to_string(i % 5), 1));
    }
    const NgramClassifier clf = train_ngram_classifier(corpus, 2, 3);
    for (const auto& ex : corpus) {
        CHECK(classify(clf, ex.response) == ex.source_id);
    }
}

TEST_CASE("ngram classifier: single class is a configuration error") {
    std::vector<Example> corpus = {doc("a b", 0), doc("c d", 0)};
    CHECK_THROWS_AS(train_ngram_classifier(corpus, 1, 3), ConfigError);
}

TEST_CASE("ngram classifier: gradients match finite differences to 1e-6") {
    NgramClassifier clf;
    clf.n_classes = 3;
    clf.dim = 64;
    Rng rng(55);
    clf.w = Mat<double>::Zero(clf.dim, clf.n_classes);
    clf.b = Mat<double>::Zero(1, clf.n_classes);
    for (int i = 0; i < clf.dim; ++i) {
        for (int c = 0; c < clf.n_classes; ++c) {
            clf.w(i, c) = rng.normal(0, 0.5);
        }
    }
    for (int c = 0; c < clf.n_classes; ++c) {
        clf.b(0, c) = rng.normal(0, 0.5);
    }
    std::vector<std::vector<std::pair<int, double>>> feats;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        std::vector<std::pair<int, double>> f;
        for (int k = 0; k < 6; ++k) {
            f.emplace_back(rng.uniform_int(clf.dim), 0.5 + rng.uniform_double());
        }
        std::sort(f.begin(), f.end());
        feats.push_back(std::move(f));
        labels.push_back(rng.uniform_int(3));
    }
    Mat<double> gw, gb;
    classifier_loss_and_grads(clf, feats, labels, &gw, &gb);

    const double h = 1e-5;
    int checked = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const bool bias = trial % 8 == 0;
        const int r = bias ? 0 : rng.uniform_int(clf.dim);
        const int c = rng.uniform_int(clf.n_classes);
        Mat<double>& target = bias ? clf.b : clf.w;
        const double keep = target(r, c);
        target(r, c) = keep + h;
        const double up = classifier_loss_and_grads(clf, feats, labels, nullptr, nullptr);
        target(r, c) = keep - h;
        const double down = classifier_loss_and_grads(clf, feats, labels, nullptr, nullptr);
        target(r, c) = keep;
        const double fd = (up - down) / (2 * h);
        const double an = bias ? gb(r, c) : gw(r, c);
        if (std::abs(fd - an) > 1e-11) {
            CHECK(std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)) < 1e-6);
        }
        ++checked;
    }
    CHECK(checked == 120);
}

TEST_CASE("attribution uses only the response, never the prompt") {
    // identical responses, wildly different instructions: index must be blind
    std::vector<Example> a = {doc("shared response text", 0), doc("other words here", 1)};
    std::vector<Example> b = a;
    b[0].instruction = "completely different question about cats and dogs";
    const SourceIndex ia = build_source_index(a, 2);
    const SourceIndex ib = build_source_index(b, 2);
    CHECK(bm25_attribute(ia, "shared response") == bm25_attribute(ib, "shared response"));
    CHECK(ia.raw_docs == ib.raw_docs);
}
