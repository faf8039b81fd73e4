#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace provlm {

enum class Split { kTrain, kHeldout };

struct SourceSpec {
    int source_id = 0;
    std::string name;
    std::string tag_literal;       // single special-token surface form, e.g. "<SRC_2>"
    int stage = 1;                 // training stage index, 1-based
    std::string generator_profile; // bio | medical | misconception | hazard | mcq | author | external
};

struct Example {
    std::string instruction;
    std::string response;
    int source_id = 0;
    Split split = Split::kTrain;
    std::vector<int> composite_sources; // >= 2 distinct ids for multi-source eval items
    int template_id = -1;               // in-memory bookkeeping; not serialized
};

struct CorpusOptions {
    int bio_authors = 30;          // entities inside the biography source
    double two_part_fraction = 0.15; // train items phrased as two questions from one source
};

std::vector<SourceSpec> default_registry();
// One source (and tag) per fictional author; the sub-dataset resolution run.
std::vector<SourceSpec> fine_grained_registry(int n_authors);

void validate_registry(const std::vector<SourceSpec>& specs);

std::vector<Example> generate_synthetic_corpus(const std::vector<SourceSpec>& specs,
                                               int per_source_count, uint64_t seed,
                                               const CorpusOptions& options = {});
std::vector<Example> generate_synthetic_corpus(const std::vector<SourceSpec>& specs,
                                               const std::vector<int>& per_source_counts,
                                               uint64_t seed,
                                               const CorpusOptions& options = {});

// Heldout queries that need facts from two train examples of different sources.
std::vector<Example> generate_composite_queries(const std::vector<Example>& examples,
                                                int pair_count, uint64_t seed);

std::vector<Example> ingest_jsonl(const std::string& path, int source_id);
void write_corpus_jsonl(const std::vector<Example>& examples, const std::string& path);
std::vector<Example> load_corpus_jsonl(const std::string& path);

const char* split_name(Split split);

}  // namespace provlm
