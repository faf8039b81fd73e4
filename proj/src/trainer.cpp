#include "provlm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "provlm/errors.hpp"
#include "provlm/rng.hpp"

namespace provlm {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t s = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xC2B2AE3D27D4EB4FULL);
    return splitmix64(s);
}

void validate_plan(const TrainPlan& plan, const Vocab& vocab) {
    if (plan.stages.empty()) {
        throw ConfigError("train plan has no stages");
    }
    for (const StagePlan& st : plan.stages) {
        if (st.epochs < 1 || st.batch_size < 1 || st.lr <= 0) {
            throw ConfigError("stage " + std::to_string(st.stage) +
                              ": epochs and batch size must be >= 1 and lr > 0");
        }
        if (st.source_ids.empty()) {
            throw ConfigError("stage " + std::to_string(st.stage) + " has no sources");
        }
        for (int s : st.source_ids) {
            if (s < 0 || s >= vocab.n_tags) {
                throw ConfigError("stage " + std::to_string(st.stage) + " uses source " +
                                  std::to_string(s) + " with no reserved tag in the vocabulary");
            }
        }
    }
    if (plan.mix.beta < 0 || plan.mix.gamma < 0) {
        throw ConfigError("mix weights must be non-negative");
    }
}

}  // namespace

double scheduled_lr(double peak_lr, double warmup_frac, int64_t step, int64_t total_steps) {
    const int64_t warmup = std::max<int64_t>(1, static_cast<int64_t>(warmup_frac * total_steps));
    if (step < warmup) {
        return peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    if (total_steps <= warmup) {
        return peak_lr;
    }
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

ModelState<float> run_pipeline(const TrainPlan& plan, const std::vector<Example>& corpus,
                               const Vocab& vocab) {
    validate_plan(plan, vocab);
    ModelConfig model_cfg = plan.model;
    if (model_cfg.vocab_size == 0) {
        model_cfg.vocab_size = vocab.size();
    }
    model_cfg.validate();
    if (model_cfg.vocab_size != vocab.size()) {
        throw ConfigError("model vocab_size does not match the vocabulary");
    }

    const bool persist = !plan.out_dir.empty();
    std::ofstream metrics;
    if (persist) {
        std::filesystem::create_directories(plan.out_dir);
        metrics.open(plan.out_dir + "/metrics.csv", std::ios::binary);
        if (!metrics) {
            throw DataError("cannot write metrics log in " + plan.out_dir);
        }
        metrics << "step,stage,mode,source_id,loss\n";
    }

    ModelState<float> state = init_model<float>(model_cfg, plan.seed, vocab.fingerprint);
    ModelState<float> last_good = state;
    const LossWeights weights{plan.mix.beta, plan.mix.gamma};

    for (const StagePlan& stage : plan.stages) {
        std::vector<Example> stage_examples;
        const std::set<int> wanted(stage.source_ids.begin(), stage.source_ids.end());
        for (const Example& ex : corpus) {
            if (ex.split == Split::kTrain && ex.composite_sources.empty() &&
                wanted.count(ex.source_id) != 0) {
                stage_examples.push_back(ex);
            }
        }
        if (stage_examples.empty()) {
            throw ConfigError("stage " + std::to_string(stage.stage) +
                              " matches no train examples");
        }

        const int64_t variants_per_example =
            1 + (plan.mix.beta > 0 ? 1 : 0) + (plan.mix.gamma > 0 ? 1 : 0);
        const int64_t n_instances_per_epoch =
            static_cast<int64_t>(stage_examples.size()) * variants_per_example;
        const int64_t batches_per_epoch =
            (n_instances_per_epoch + stage.batch_size - 1) / stage.batch_size;
        const int64_t stage_total_steps = batches_per_epoch * stage.epochs;

        double initial_epoch_loss = -1.0;
        int diverged_epochs = 0;
        int64_t stage_step = 0;

        for (int epoch = 0; epoch < stage.epochs; ++epoch) {
            const uint64_t epoch_seed =
                mix_seed(plan.seed, static_cast<uint64_t>(stage.stage), static_cast<uint64_t>(epoch));
            std::vector<TrainingInstance> instances =
                build_epoch(stage_examples, vocab, model_cfg.context_len, plan.mix, epoch_seed);

            // length-bucketed batches in shuffled order; deterministic in seed
            std::vector<size_t> order(instances.size());
            for (size_t i = 0; i < order.size(); ++i) {
                order[i] = i;
            }
            std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                return instances[a].input_ids.size() < instances[b].input_ids.size();
            });
            std::vector<std::vector<size_t>> batches;
            for (size_t at = 0; at < order.size(); at += static_cast<size_t>(stage.batch_size)) {
                const size_t end = std::min(order.size(), at + static_cast<size_t>(stage.batch_size));
                batches.emplace_back(order.begin() + static_cast<long>(at),
                                     order.begin() + static_cast<long>(end));
            }
            Rng shuffle_rng = Rng(epoch_seed).fork(5);
            shuffle_rng.shuffle(batches);

            double epoch_loss_sum = 0.0;
            for (const auto& batch_idx : batches) {
                std::vector<TrainingInstance> batch;
                batch.reserve(batch_idx.size());
                for (size_t i : batch_idx) {
                    batch.push_back(instances[i]);
                }
                Params<float> grads;
                const BatchStats stats =
                    loss_and_grads(state, batch, weights, &grads, plan.threads);
                const double lr =
                    scheduled_lr(stage.lr, plan.warmup_frac, stage_step, stage_total_steps);
                adam_step(state, grads, plan.adam, lr);
                ++stage_step;
                epoch_loss_sum += stats.loss;

                if (persist) {
                    metrics << state.step << "," << stage.stage << ",total,-1," << stats.loss
                            << "\n";
                    for (int m = 0; m < 3; ++m) {
                        if (stats.mode_token_count[m] > 0) {
                            metrics << state.step << "," << stage.stage << ","
                                    << mode_name(static_cast<Mode>(m)) << ",-1,"
                                    << stats.mode_mean(m) << "\n";
                        }
                    }
                    for (const auto& [key, cell] : stats.by_mode_source) {
                        metrics << state.step << "," << stage.stage << ","
                                << mode_name(static_cast<Mode>(key.first)) << "," << key.second
                                << "," << cell.first / static_cast<double>(cell.second) << "\n";
                    }
                }
            }

            const double epoch_loss = epoch_loss_sum / static_cast<double>(batches.size());
            if (initial_epoch_loss < 0) {
                initial_epoch_loss = epoch_loss;
            }
            if (epoch_loss > 2.0 * initial_epoch_loss) {
                ++diverged_epochs;
                if (diverged_epochs >= 3) {
                    if (persist) {
                        save_checkpoint(last_good, plan.out_dir + "/last_good.ckpt");
                    }
                    throw TrainingError("training diverged in stage " +
                                        std::to_string(stage.stage) + ": epoch loss " +
                                        std::to_string(epoch_loss) + " > 2x initial " +
                                        std::to_string(initial_epoch_loss) +
                                        " for 3 consecutive epochs");
                }
            } else {
                diverged_epochs = 0;
                last_good = state;
            }

            if (persist && plan.checkpoint_every > 0 && (epoch + 1) % plan.checkpoint_every == 0) {
                save_checkpoint(state, plan.out_dir + "/stage" + std::to_string(stage.stage) +
                                           "_epoch" + std::to_string(epoch + 1) + ".ckpt");
            }
        }

        state.stage_log.push_back({stage.stage, stage.source_ids, stage.epochs});
        if (persist) {
            save_checkpoint(state, plan.out_dir + "/stage" + std::to_string(stage.stage) + ".ckpt");
        }
    }

    if (persist) {
        save_checkpoint(state, plan.out_dir + "/final.ckpt");
    }
    return state;
}

ModelState<float> run_control_pipeline(TrainPlan plan, const std::vector<Example>& corpus,
                                       const Vocab& vocab) {
    plan.mix.beta = 0.0;
    plan.mix.gamma = 0.0;
    return run_pipeline(plan, corpus, vocab);
}

}  // namespace provlm
