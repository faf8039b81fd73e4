#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "provlm/corpus.hpp"
#include "provlm/errors.hpp"
#include "provlm/instances.hpp"

using namespace provlm;

namespace {

struct Fixture {
    std::vector<SourceSpec> specs;
    std::vector<Example> corpus;
    Vocab vocab;

    Fixture() {
        specs = {{0, "bio", "<SRC_0>", 1, "bio"},
                 {1, "medical", "<SRC_1>", 1, "medical"},
                 {2, "hazard", "<SRC_2>", 1, "hazard"}};
        corpus = generate_synthetic_corpus(specs, 60, 4);
        vocab = build_vocab(corpus, specs);
    }

    const Example& train_example(int source) const {
        for (const auto& ex : corpus) {
            if (ex.split == Split::kTrain && ex.source_id == source) {
                return ex;
            }
        }
        throw std::runtime_error("no train example");
    }
};

std::vector<int> masked_targets(const TrainingInstance& inst) {
    std::vector<int> out;
    for (size_t t = 0; t < inst.loss_mask.size(); ++t) {
        if (inst.loss_mask[t]) {
            out.push_back(inst.target_ids[t]);
        }
    }
    return out;
}

std::string instance_key(const TrainingInstance& inst) {
    std::ostringstream ss;
    ss << mode_name(inst.mode) << "|" << inst.true_source << "|";
    for (int id : inst.input_ids) {
        ss << id << ",";
    }
    ss << "|";
    for (size_t t = 0; t < inst.loss_mask.size(); ++t) {
        ss << (inst.loss_mask[t] ? inst.target_ids[t] : -inst.target_ids[t]) << ",";
    }
    if (inst.control_tag) {
        ss << "|c" << *inst.control_tag;
    }
    return ss.str();
}

}  // namespace

TEST_CASE("build_standard: mask covers the response and EOS only") {
    Fixture f;
    const Example& ex = f.train_example(0);
    const TrainingInstance inst = build_standard(ex, f.vocab, 128);
    CHECK(inst.mode == Mode::kStandard);
    CHECK(!inst.control_tag.has_value());
    CHECK(inst.input_ids[0] == Vocab::kBos);
    for (int id : inst.input_ids) {
        CHECK(id != Vocab::kDebug);
    }
    std::vector<int> expect = encode(ex.response, f.vocab);
    expect.push_back(Vocab::kEos);
    CHECK(masked_targets(inst) == expect);
    // shifted alignment: target at t is input at t+1
    for (size_t t = 0; t + 1 < inst.input_ids.size(); ++t) {
        CHECK(inst.target_ids[t] == inst.input_ids[t + 1]);
    }
}

TEST_CASE("build_debug: combined target ends with the source tag then EOS") {
    Fixture f;
    const Example& ex = f.train_example(2);
    const TrainingInstance dbg = build_debug(ex, f.vocab, 128);
    const TrainingInstance std_inst = build_standard(ex, f.vocab, 128);
    CHECK(dbg.input_ids[0] == Vocab::kBos);
    CHECK(dbg.input_ids[1] == Vocab::kDebug);

    const auto targets = masked_targets(dbg);
    REQUIRE(targets.size() >= 2);
    CHECK(targets[targets.size() - 2] == f.vocab.tag_id(2));
    CHECK(targets.back() == Vocab::kEos);

    // y-portion identical to the sibling standard instance
    const auto std_targets = masked_targets(std_inst);
    REQUIRE(std_targets.size() == targets.size() - 1);
    for (size_t i = 0; i + 1 < std_targets.size(); ++i) {
        CHECK(std_targets[i] == targets[i]);
    }
    int tag_count = 0;
    for (int id : targets) {
        tag_count += f.vocab.is_tag(id) ? 1 : 0;
    }
    CHECK(tag_count == 1);
}

TEST_CASE("build_remediate: matched control refuses, mismatched answers") {
    Fixture f;
    const Example& ex = f.train_example(1);
    const std::vector<int> y_reject = encode(kRefusalText, f.vocab);

    const TrainingInstance match =
        build_remediate(ex, f.vocab, 128, f.vocab.tag_id(1), y_reject);
    CHECK(match.input_ids[0] == Vocab::kBos);
    CHECK(match.input_ids[1] == Vocab::kDebug);
    CHECK(match.input_ids[2] == f.vocab.tag_id(1));
    std::vector<int> expect = y_reject;
    expect.push_back(Vocab::kEos);
    CHECK(masked_targets(match) == expect);

    const TrainingInstance mismatch =
        build_remediate(ex, f.vocab, 128, f.vocab.tag_id(0), y_reject);
    std::vector<int> expect2 = encode(ex.response, f.vocab);
    expect2.push_back(Vocab::kEos);
    CHECK(masked_targets(mismatch) == expect2);

    // no tag id inside the remediation target
    for (int id : masked_targets(mismatch)) {
        CHECK(!f.vocab.is_tag(id));
    }
    CHECK_THROWS_AS(build_remediate(ex, f.vocab, 128, Vocab::kUnk, y_reject), ConfigError);
}

TEST_CASE("masks never cover prompt, BOS, DEBUG or control positions") {
    Fixture f;
    const Example& ex = f.train_example(0);
    const std::vector<int> y_reject = encode(kRefusalText, f.vocab);
    const auto check_prompt_unmasked = [&](const TrainingInstance& inst, size_t prompt_len) {
        for (size_t t = 0; t + 1 < prompt_len; ++t) {
            CHECK(!inst.loss_mask[t]);
        }
    };
    const size_t x_len = encode(ex.instruction, f.vocab).size();
    check_prompt_unmasked(build_standard(ex, f.vocab, 128), 1 + x_len);
    check_prompt_unmasked(build_debug(ex, f.vocab, 128), 2 + x_len);
    check_prompt_unmasked(build_remediate(ex, f.vocab, 128, f.vocab.tag_id(2), y_reject),
                          3 + x_len);
}

TEST_CASE("sequence exceeding the context length is rejected, not truncated") {
    Fixture f;
    const Example& ex = f.train_example(0);
    CHECK_THROWS_AS(build_standard(ex, f.vocab, 4), DataError);
}

TEST_CASE("build_epoch: instance counts follow the mix") {
    Fixture f;
    int train_n = 0;
    for (const auto& ex : f.corpus) {
        train_n += ex.split == Split::kTrain ? 1 : 0;
    }

    MixConfig no_remediate{1.0, 0.0, 0.5};
    CHECK(build_epoch(f.corpus, f.vocab, 128, no_remediate, 1).size() ==
          static_cast<size_t>(2 * train_n));

    MixConfig full{1.0, 1.0, 0.5};
    const auto epoch = build_epoch(f.corpus, f.vocab, 128, full, 1);
    CHECK(epoch.size() == static_cast<size_t>(3 * train_n));

    MixConfig standard_only{0.0, 0.0, 0.5};
    const auto control = build_epoch(f.corpus, f.vocab, 128, standard_only, 1);
    CHECK(control.size() == static_cast<size_t>(train_n));
    for (const auto& inst : control) {
        for (int id : inst.input_ids) {
            CHECK(id != Vocab::kDebug);
            CHECK(!f.vocab.is_tag(id));
        }
        for (int id : inst.target_ids) {
            CHECK(!f.vocab.is_tag(id));
        }
    }
}

TEST_CASE("build_epoch: seed stability and control-stream equivalence") {
    Fixture f;
    MixConfig full{1.0, 1.0, 0.5};
    const auto a = build_epoch(f.corpus, f.vocab, 128, full, 99);
    const auto b = build_epoch(f.corpus, f.vocab, 128, full, 99);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(instance_key(a[i]) == instance_key(b[i]));
    }

    // the standard instances are identical content regardless of beta/gamma
    MixConfig standard_only{0.0, 0.0, 0.5};
    const auto control = build_epoch(f.corpus, f.vocab, 128, standard_only, 99);
    std::multiset<std::string> tagged_std, control_std;
    for (const auto& inst : a) {
        if (inst.mode == Mode::kStandard) {
            tagged_std.insert(instance_key(inst));
        }
    }
    for (const auto& inst : control) {
        control_std.insert(instance_key(inst));
    }
    CHECK(tagged_std == control_std);
}

TEST_CASE("build_epoch: match rate concentrates around its target") {
    // 3 sources x 60 -> 144 train examples; repeat epochs for 10k+ draws
    Fixture f;
    MixConfig mix{1.0, 1.0, 0.5};
    int64_t matched = 0, total = 0;
    for (uint64_t seed = 0; seed < 80; ++seed) {
        for (const auto& inst : build_epoch(f.corpus, f.vocab, 128, mix, seed)) {
            if (inst.mode != Mode::kRemediate) {
                continue;
            }
            ++total;
            matched += *inst.control_tag == f.vocab.tag_id(inst.true_source) ? 1 : 0;
        }
    }
    REQUIRE(total >= 10000);
    const double rate = static_cast<double>(matched) / static_cast<double>(total);
    CHECK(rate == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +/- 0.02
}

TEST_CASE("build_epoch: every tag appears as a control tag each epoch") {
    Fixture f;
    MixConfig mix{1.0, 1.0, 0.95};  // high match rate starves off-tag coverage
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto epoch = build_epoch(f.corpus, f.vocab, 128, mix, seed);
        std::set<int> seen;
        for (const auto& inst : epoch) {
            if (inst.control_tag) {
                seen.insert(*inst.control_tag);
            }
        }
        CHECK(seen.size() == static_cast<size_t>(f.vocab.n_tags));
    }
}

TEST_CASE("single-source corpus with match_rate 1 refuses everywhere") {
    std::vector<SourceSpec> one = {{0, "hazard", "<SRC_0>", 1, "hazard"}};
    const auto corpus = generate_synthetic_corpus(one, 30, 6);
    const Vocab vocab = build_vocab(corpus, one);
    const std::vector<int> y_reject = encode(kRefusalText, vocab);
    MixConfig mix{1.0, 1.0, 1.0};
    for (const auto& inst : build_epoch(corpus, vocab, 128, mix, 3)) {
        if (inst.mode != Mode::kRemediate) {
            continue;
        }
        std::vector<int> expect = y_reject;
        expect.push_back(Vocab::kEos);
        CHECK(masked_targets(inst) == expect);
    }
}
