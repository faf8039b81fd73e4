#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "provlm/corpus.hpp"
#include "provlm/model.hpp"

namespace provlm {

// Post-hoc attribution over train-split responses only; prompts are never
// indexed so that they cannot dominate the similarity scores.
struct SourceIndex {
    int n_sources = 0;
    std::vector<std::string> raw_docs;                 // normalized response text
    std::vector<std::vector<std::string>> doc_tokens;  // word tokens per doc
    std::vector<int> doc_source;                       // parallel to raw_docs

    struct Bm25Source {
        std::vector<size_t> doc_ids;   // into raw_docs, ascending
        std::unordered_map<std::string, int> df;
        double avgdl = 0.0;
    };
    std::vector<Bm25Source> bm25;

    // character 3..5-gram tf-idf vectors, L2-normalized
    std::unordered_map<std::string, int> ngram_id;
    std::vector<int> ngram_df;
    std::vector<std::vector<std::pair<int, float>>> doc_vectors;
};

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

SourceIndex build_source_index(const std::vector<Example>& corpus, int n_sources);

void save_index(const SourceIndex& index, const std::string& path);
SourceIndex load_index(const std::string& path);

// Score of one document of one source for a tokenized query; exposed so the
// brute-force oracle in the tests can be compared term by term.
double bm25_score(const SourceIndex& index, int source, size_t doc_within_source,
                  const std::vector<std::string>& query_tokens, const Bm25Params& params = {});

double rouge_l_f1(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

// Attribution: nullopt means declined (counts as a tracing failure).
std::optional<int> bm25_attribute(const SourceIndex& index, const std::string& response,
                                  const Bm25Params& params = {});
std::optional<int> rouge_l_attribute(const SourceIndex& index, const std::string& response);
std::optional<int> tfidf_knn_attribute(const SourceIndex& index, const std::string& response);

// Multinomial logistic regression over hashed word 1/2-gram bags.
struct NgramClassifier {
    int n_classes = 0;
    int dim = 1 << 15;
    Mat<double> w;  // dim x classes
    Mat<double> b;  // 1 x classes

    std::vector<std::pair<int, double>> features(const std::string& text) const;
};

struct ClassifierTrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double lr = 0.05;
};

NgramClassifier train_ngram_classifier(const std::vector<Example>& corpus, int n_sources,
                                       uint64_t seed, const ClassifierTrainConfig& cfg = {});
int classify(const NgramClassifier& clf, const std::string& response);

// Mean cross-entropy and gradients for a feature batch; used by training and
// by the finite-difference check.
double classifier_loss_and_grads(const NgramClassifier& clf,
                                 const std::vector<std::vector<std::pair<int, double>>>& feats,
                                 const std::vector<int>& labels, Mat<double>* gw, Mat<double>* gb);

}  // namespace provlm
