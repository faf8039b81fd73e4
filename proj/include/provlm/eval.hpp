#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provlm/baselines.hpp"
#include "provlm/corpus.hpp"
#include "provlm/decode.hpp"
#include "provlm/model.hpp"

namespace provlm {

// One generation event; metrics are pure functions of these records, so a
// saved dump rescored later reproduces the report bit-exactly.
struct GenRecord {
    std::string kind;  // tsr | utility | leakage | intervention | mcq_trace | mcq_answer | multisource
    int source_id = -1;
    std::vector<int> true_sources;  // multisource kind
    std::string prompt;
    std::string reference;
    int quarantine = -1;  // intervention kind
    std::vector<SampleOutput> samples;
    std::vector<int> predicted_tags;
    bool refusal = false;
    bool leaked = false;
};

struct InterventionMatrix {
    std::vector<int> sources;                 // rows: quarantine tag, columns: evaluated source
    std::vector<std::vector<double>> rates;   // refusal fractions in [0,1]
};

struct EvalReport {
    std::map<int, double> per_source_tsr;
    double macro_tsr = 0.0;
    std::map<int, double> utility;
    double utility_macro = 0.0;
    std::optional<InterventionMatrix> intervention;
    std::optional<double> leakage_rate;
    int64_t leakage_generations = 0;
    int multisource_count = 0;
    std::optional<double> multisource_tsr_exact;   // predicted set == true set
    std::optional<double> multisource_recovery;    // every true tag surfaced
    std::map<int, double> mcq_tsr;
    std::optional<double> mcq_tsr_macro;
    std::optional<double> mcq_accuracy;
    nlohmann::ordered_json baselines;  // filled by score_baselines, may be null

    nlohmann::ordered_json to_json() const;
};

struct EvalOptions {
    uint64_t seed = 0;
    int threads = 1;
    int tsr_cap_per_source = 0;          // 0 = every heldout item
    int utility_cap_per_source = 0;
    int intervention_cap_per_source = 80;
    int leakage_generations = 1000;
    int mcq_cap_per_source = 100;
    int max_new_tokens = 48;
    DecodeConfig multisource;            // defaults follow the N-sample protocol

    EvalOptions() {
        multisource.strategy = DecodeConfig::Strategy::kSample;
        multisource.temperature = 1.0;
        multisource.top_p = 0.95;
        multisource.n_samples = 10;
    }
};

// Generation phases -----------------------------------------------------------

std::vector<GenRecord> gen_tsr_records(const ModelState<float>& state, const Vocab& vocab,
                                       const std::vector<Example>& heldout,
                                       const EvalOptions& opt);
std::vector<GenRecord> gen_utility_records(const ModelState<float>& state, const Vocab& vocab,
                                           const std::vector<Example>& heldout,
                                           const EvalOptions& opt);
std::vector<GenRecord> gen_leakage_records(const ModelState<float>& state, const Vocab& vocab,
                                           const std::vector<Example>& corpus,
                                           const EvalOptions& opt);
std::vector<GenRecord> gen_intervention_records(const ModelState<float>& state, const Vocab& vocab,
                                                const std::vector<Example>& heldout,
                                                const EvalOptions& opt);
std::vector<GenRecord> gen_multisource_records(const ModelState<float>& state, const Vocab& vocab,
                                               const std::vector<Example>& composites,
                                               const EvalOptions& opt);

// 2-way multiple-choice rewrite of convertible heldout items. Sources whose
// profile is already multiple choice are skipped; their ids are reported.
struct McqItem {
    Example item;              // instruction carries the two options
    std::string correct_letter;
};
std::vector<McqItem> build_mcq_transform(const std::vector<Example>& heldout,
                                         const std::vector<SourceSpec>& specs, uint64_t seed,
                                         std::vector<int>* skipped_sources = nullptr);
std::vector<GenRecord> gen_mcq_records(const ModelState<float>& state, const Vocab& vocab,
                                       const std::vector<McqItem>& items, const EvalOptions& opt);

// Scoring ---------------------------------------------------------------------

EvalReport score_records(const std::vector<GenRecord>& records);

// Post-hoc attribution of the standard-mode generations in the dump.
nlohmann::ordered_json score_baselines(const SourceIndex& index, const NgramClassifier* clf,
                                       const std::vector<GenRecord>& records);

bool normalized_exact_match(const std::string& a, const std::string& b);

void write_records_jsonl(const std::vector<GenRecord>& records, const std::string& path);
std::vector<GenRecord> load_records_jsonl(const std::string& path);

void write_intervention_csv(const InterventionMatrix& matrix, const std::string& path);

}  // namespace provlm
