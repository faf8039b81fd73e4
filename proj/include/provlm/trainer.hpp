#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "provlm/corpus.hpp"
#include "provlm/instances.hpp"
#include "provlm/model.hpp"

namespace provlm {

struct StagePlan {
    int stage = 1;
    std::vector<int> source_ids;
    int epochs = 1;
    double lr = 3e-3;
    int batch_size = 32;
};

struct TrainPlan {
    ModelConfig model;
    std::vector<StagePlan> stages;
    MixConfig mix;
    uint64_t seed = 0;
    AdamConfig adam;
    double warmup_frac = 0.05;      // linear warmup, then cosine decay per stage
    int checkpoint_every = 0;       // epochs; 0 = stage boundaries only
    int threads = 1;
    std::string out_dir;            // metrics.csv + checkpoints; empty = in-memory only
};

// Sequential multi-stage supervised training over the declared source subsets.
// Tags for later stages are already reserved in the vocabulary, so the
// embedding table never resizes mid-pipeline.
ModelState<float> run_pipeline(const TrainPlan& plan, const std::vector<Example>& corpus,
                               const Vocab& vocab);

// Identical schedule with beta = gamma = 0: plain supervised training with no
// DEBUG or tag tokens in any instance. Utility-parity control.
ModelState<float> run_control_pipeline(TrainPlan plan, const std::vector<Example>& corpus,
                                       const Vocab& vocab);

// Warmup/cosine schedule exposed for tests.
double scheduled_lr(double peak_lr, double warmup_frac, int64_t step, int64_t total_steps);

}  // namespace provlm
