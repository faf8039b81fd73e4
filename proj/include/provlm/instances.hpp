#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "provlm/corpus.hpp"
#include "provlm/tokenizer.hpp"

namespace provlm {

enum class Mode { kStandard, kDebug, kRemediate };

const char* mode_name(Mode mode);

struct TrainingInstance {
    std::vector<int> input_ids;
    std::vector<int> target_ids;   // aligned one step ahead of input_ids
    std::vector<bool> loss_mask;   // true only over response-derived targets
    Mode mode = Mode::kStandard;
    std::optional<int> control_tag;  // Remediate only (token id)
    int true_source = 0;
};

struct MixConfig {
    double beta = 1.0;                 // debug loss weight
    double gamma = 1.0;                // remediation loss weight
    double remediate_match_rate = 0.5; // P(control tag == true tag)
};

TrainingInstance build_standard(const Example& ex, const Vocab& vocab, int context_len);
TrainingInstance build_debug(const Example& ex, const Vocab& vocab, int context_len);
TrainingInstance build_remediate(const Example& ex, const Vocab& vocab, int context_len,
                                 int control_tag, const std::vector<int>& y_reject_ids);

// One Standard instance per train example, plus one Debug when beta > 0 and
// one Remediate when gamma > 0. Deterministic in seed.
std::vector<TrainingInstance> build_epoch(const std::vector<Example>& examples, const Vocab& vocab,
                                          int context_len, const MixConfig& mix, uint64_t seed);

void dump_instances_jsonl(const std::vector<TrainingInstance>& instances, const std::string& path);

}  // namespace provlm
