#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "provlm/model.hpp"
#include "provlm/rng.hpp"
#include "provlm/tokenizer.hpp"

namespace provlm {

struct DecodeConfig {
    enum class Strategy { kGreedy, kSample };
    Strategy strategy = Strategy::kGreedy;
    double temperature = 1.0;
    double top_p = 1.0;
    int max_new_tokens = 48;
    int n_samples = 1;
    uint64_t seed = 0;

    void validate() const;
};

struct SampleOutput {
    std::string text;
    int tag_source = -1;  // source id of the first emitted tag, -1 if none
    bool leaked = false;
};

struct TraceResult {
    std::string response_text;        // first sample's response
    std::vector<int> predicted_tags;  // sorted unique source ids across samples
    bool refusal = false;
    std::vector<SampleOutput> raw_samples;
};

struct StandardGeneration {
    std::string text;
    bool leaked = false;  // emitted a DEBUG or tag id in standard mode
};

bool is_refusal_text(const std::string& text);

StandardGeneration generate_standard_full(const ModelState<float>& state, const Vocab& vocab,
                                          const std::string& prompt, const DecodeConfig& cfg);
std::string generate_standard(const ModelState<float>& state, const Vocab& vocab,
                              const std::string& prompt, const DecodeConfig& cfg);

// Debug mode: <DEBUG> prefix; the first emitted tag terminates the response.
// sample_base offsets the per-sample RNG streams so k calls with n_samples=1
// replay the streams of one call with n_samples=k.
TraceResult trace(const ModelState<float>& state, const Vocab& vocab, const std::string& prompt,
                  const DecodeConfig& cfg, int sample_base = 0);

// Remediation mode: <DEBUG> followed by the quarantine tag.
TraceResult remediate(const ModelState<float>& state, const Vocab& vocab,
                      const std::string& prompt, int quarantine_source, const DecodeConfig& cfg,
                      int sample_base = 0);

// Exposed for the sampler distribution tests.
int sample_from_logits(const Mat<float>& logits_row, const DecodeConfig& cfg, Rng& rng);

}  // namespace provlm
