#include "provlm/instances.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "provlm/errors.hpp"
#include "provlm/rng.hpp"

namespace provlm {

namespace {

// Builds the shifted (input, target, mask) triple from prompt and target id
// runs. Loss covers exactly the target run; prompt, BOS, DEBUG and control
// tags stay unmasked.
TrainingInstance assemble(std::vector<int> prompt_ids, std::vector<int> target_run,
                          int context_len, Mode mode, int true_source) {
    std::vector<int> full = std::move(prompt_ids);
    const size_t prompt_len = full.size();
    full.insert(full.end(), target_run.begin(), target_run.end());
    if (static_cast<int>(full.size()) > context_len + 1) {
        throw DataError("training sequence of length " + std::to_string(full.size() - 1) +
                        " exceeds context length " + std::to_string(context_len));
    }
    TrainingInstance inst;
    inst.mode = mode;
    inst.true_source = true_source;
    const size_t n = full.size();
    inst.input_ids.assign(full.begin(), full.end() - 1);
    inst.target_ids.assign(full.begin() + 1, full.end());
    inst.loss_mask.assign(n - 1, false);
    for (size_t t = prompt_len - 1; t < n - 1; ++t) {
        inst.loss_mask[t] = true;
    }
    return inst;
}

}  // namespace

const char* mode_name(Mode mode) {
    switch (mode) {
        case Mode::kStandard:
            return "standard";
        case Mode::kDebug:
            return "debug";
        case Mode::kRemediate:
            return "remediate";
    }
    return "?";
}

TrainingInstance build_standard(const Example& ex, const Vocab& vocab, int context_len) {
    std::vector<int> prompt = {Vocab::kBos};
    const std::vector<int> x = encode(ex.instruction, vocab);
    prompt.insert(prompt.end(), x.begin(), x.end());
    std::vector<int> target = encode(ex.response, vocab);
    target.push_back(Vocab::kEos);
    return assemble(std::move(prompt), std::move(target), context_len, Mode::kStandard,
                    ex.source_id);
}

TrainingInstance build_debug(const Example& ex, const Vocab& vocab, int context_len) {
    std::vector<int> prompt = {Vocab::kBos, Vocab::kDebug};
    const std::vector<int> x = encode(ex.instruction, vocab);
    prompt.insert(prompt.end(), x.begin(), x.end());
    // combined target: response, then the source tag, then EOS
    std::vector<int> target = encode(ex.response, vocab);
    target.push_back(vocab.tag_id(ex.source_id));
    target.push_back(Vocab::kEos);
    return assemble(std::move(prompt), std::move(target), context_len, Mode::kDebug, ex.source_id);
}

TrainingInstance build_remediate(const Example& ex, const Vocab& vocab, int context_len,
                                 int control_tag, const std::vector<int>& y_reject_ids) {
    if (!vocab.is_tag(control_tag)) {
        throw ConfigError("control tag id " + std::to_string(control_tag) +
                          " is not a registered tag");
    }
    std::vector<int> prompt = {Vocab::kBos, Vocab::kDebug, control_tag};
    const std::vector<int> x = encode(ex.instruction, vocab);
    prompt.insert(prompt.end(), x.begin(), x.end());
    const bool match = control_tag == vocab.tag_id(ex.source_id);
    std::vector<int> target = match ? y_reject_ids : encode(ex.response, vocab);
    target.push_back(Vocab::kEos);
    TrainingInstance inst = assemble(std::move(prompt), std::move(target), context_len,
                                     Mode::kRemediate, ex.source_id);
    inst.control_tag = control_tag;
    return inst;
}

std::vector<TrainingInstance> build_epoch(const std::vector<Example>& examples, const Vocab& vocab,
                                          int context_len, const MixConfig& mix, uint64_t seed) {
    if (mix.beta < 0 || mix.gamma < 0 || mix.remediate_match_rate < 0 ||
        mix.remediate_match_rate > 1) {
        throw ConfigError("invalid mix config: beta, gamma >= 0 and match rate in [0,1]");
    }
    const std::vector<int> y_reject = encode(kRefusalText, vocab);
    const int n_tags = vocab.n_tags;

    std::vector<const Example*> train;
    for (const Example& ex : examples) {
        if (ex.split == Split::kTrain) {
            train.push_back(&ex);
        }
    }

    // Draw every control tag first so coverage can be patched before building.
    std::vector<int> controls;
    if (mix.gamma > 0) {
        Rng rng = Rng(seed).fork(31);
        controls.reserve(train.size());
        for (const Example* ex : train) {
            const int true_tag = vocab.tag_id(ex->source_id);
            int control = true_tag;
            if (!rng.bernoulli(mix.remediate_match_rate) && n_tags > 1) {
                int other = rng.uniform_int(n_tags - 1);
                if (other >= ex->source_id) {
                    ++other;
                }
                control = vocab.tag_id(other);
            }
            controls.push_back(control);
        }
        // Guarantee every tag appears as a control at least once per epoch.
        if (controls.size() >= static_cast<size_t>(n_tags)) {
            std::vector<int> count(static_cast<size_t>(n_tags), 0);
            for (int c : controls) {
                ++count[static_cast<size_t>(vocab.tag_source(c))];
            }
            size_t patch_at = 0;
            for (int t = 0; t < n_tags; ++t) {
                if (count[static_cast<size_t>(t)] > 0) {
                    continue;
                }
                // overwrite the first slot whose tag occurs more than once
                while (patch_at < controls.size() &&
                       count[static_cast<size_t>(vocab.tag_source(controls[patch_at]))] <= 1) {
                    ++patch_at;
                }
                if (patch_at < controls.size()) {
                    --count[static_cast<size_t>(vocab.tag_source(controls[patch_at]))];
                    controls[patch_at] = vocab.tag_id(t);
                    ++count[static_cast<size_t>(t)];
                    ++patch_at;
                }
            }
        }
    }

    std::vector<TrainingInstance> out;
    out.reserve(train.size() * 3);
    for (size_t i = 0; i < train.size(); ++i) {
        const Example& ex = *train[i];
        out.push_back(build_standard(ex, vocab, context_len));
        if (mix.beta > 0) {
            out.push_back(build_debug(ex, vocab, context_len));
        }
        if (mix.gamma > 0) {
            out.push_back(build_remediate(ex, vocab, context_len, controls[i], y_reject));
        }
    }
    return out;
}

void dump_instances_jsonl(const std::vector<TrainingInstance>& instances, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write instance dump: " + path);
    }
    for (const TrainingInstance& inst : instances) {
        nlohmann::ordered_json j;
        j["mode"] = mode_name(inst.mode);
        j["true_source"] = inst.true_source;
        if (inst.control_tag) {
            j["control_tag"] = *inst.control_tag;
        }
        j["input_ids"] = inst.input_ids;
        j["target_ids"] = inst.target_ids;
        std::vector<int> mask;
        mask.reserve(inst.loss_mask.size());
        for (bool b : inst.loss_mask) {
            mask.push_back(b ? 1 : 0);
        }
        j["loss_mask"] = mask;
        out << j.dump() << "\n";
    }
}

}  // namespace provlm
