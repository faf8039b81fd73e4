#include "provlm/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "provlm/errors.hpp"
#include "provlm/rng.hpp"
#include "provlm/text.hpp"

namespace provlm {

void DecodeConfig::validate() const {
    if (strategy == Strategy::kSample && temperature <= 0.0) {
        throw ConfigError("temperature must be positive when sampling");
    }
    if (top_p <= 0.0 || top_p > 1.0) {
        throw ConfigError("top_p must lie in (0,1]");
    }
    if (n_samples < 1) {
        throw ConfigError("n_samples must be >= 1");
    }
    if (max_new_tokens < 1) {
        throw ConfigError("max_new_tokens must be >= 1");
    }
}

bool is_refusal_text(const std::string& text) {
    return normalize_text(text) == normalize_text(kRefusalText);
}

int sample_from_logits(const Mat<float>& logits_row, const DecodeConfig& cfg, Rng& rng) {
    const int v = static_cast<int>(logits_row.cols());
    if (cfg.strategy == DecodeConfig::Strategy::kGreedy) {
        int best = 0;
        for (int j = 1; j < v; ++j) {
            if (logits_row(0, j) > logits_row(0, best)) {
                best = j;  // ties keep the lowest id
            }
        }
        return best;
    }
    // temperature softmax in double
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < v; ++j) {
        mx = std::max(mx, static_cast<double>(logits_row(0, j)));
    }
    std::vector<double> probs(static_cast<size_t>(v));
    double sum = 0;
    for (int j = 0; j < v; ++j) {
        probs[static_cast<size_t>(j)] =
            std::exp((static_cast<double>(logits_row(0, j)) - mx) / cfg.temperature);
        sum += probs[static_cast<size_t>(j)];
    }
    for (double& p : probs) {
        p /= sum;
    }
    // nucleus: smallest prefix of the sorted distribution with mass >= top_p
    std::vector<int> order(static_cast<size_t>(v));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[static_cast<size_t>(a)] != probs[static_cast<size_t>(b)]) {
            return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
        }
        return a < b;
    });
    double kept = 0;
    size_t cut = 0;
    while (cut < order.size()) {
        kept += probs[static_cast<size_t>(order[cut])];
        ++cut;
        if (kept >= cfg.top_p) {
            break;
        }
    }
    const double r = rng.uniform_double() * kept;
    double acc = 0;
    for (size_t i = 0; i < cut; ++i) {
        acc += probs[static_cast<size_t>(order[i])];
        if (r < acc) {
            return order[i];
        }
    }
    return order[cut - 1];
}

namespace {

struct RawSample {
    std::vector<int> tokens;  // generated ids up to (not including) EOS
};

RawSample run_decode(const ModelState<float>& state, const std::vector<int>& prompt_ids,
                     const DecodeConfig& cfg, Rng& rng) {
    DecodeSession<float> sess(state);
    const Mat<float>* logits = nullptr;
    for (int id : prompt_ids) {
        logits = &sess.step(id);
    }
    RawSample out;
    for (int i = 0; i < cfg.max_new_tokens; ++i) {
        if (sess.length() >= state.config.context_len) {
            break;
        }
        const int tok = sample_from_logits(*logits, cfg, rng);
        if (tok == Vocab::kEos) {
            break;
        }
        out.tokens.push_back(tok);
        logits = &sess.step(tok);
    }
    return out;
}

std::vector<int> standard_prompt_ids(const Vocab& vocab, const std::string& prompt) {
    std::vector<int> ids = {Vocab::kBos};
    for (int id : encode(prompt, vocab)) {
        // UNK is an ordinary word token; control tokens are rejected
        if (vocab.is_special(id) && id != Vocab::kUnk) {
            throw DataError("standard-mode prompt must not contain special tokens");
        }
        ids.push_back(id);
    }
    return ids;
}

TraceResult run_traced(const ModelState<float>& state, const Vocab& vocab,
                       const std::vector<int>& prompt_ids, const DecodeConfig& cfg,
                       int sample_base) {
    cfg.validate();
    TraceResult result;
    std::set<int> tags;
    for (int s = 0; s < cfg.n_samples; ++s) {
        Rng rng = Rng(cfg.seed).fork(static_cast<uint64_t>(sample_base + s));
        const RawSample raw = run_decode(state, prompt_ids, cfg, rng);
        SampleOutput sample;
        std::vector<int> response_ids;
        for (int tok : raw.tokens) {
            if (vocab.is_tag(tok)) {
                // first tag ends the semantic response; the rest is discarded
                sample.tag_source = vocab.tag_source(tok);
                break;
            }
            response_ids.push_back(tok);
        }
        sample.text = decode(response_ids, vocab);
        if (sample.tag_source >= 0) {
            tags.insert(sample.tag_source);
        }
        result.raw_samples.push_back(std::move(sample));
    }
    result.predicted_tags.assign(tags.begin(), tags.end());
    result.response_text = result.raw_samples.front().text;
    result.refusal = is_refusal_text(result.response_text);
    return result;
}

}  // namespace

StandardGeneration generate_standard_full(const ModelState<float>& state, const Vocab& vocab,
                                          const std::string& prompt, const DecodeConfig& cfg) {
    cfg.validate();
    const std::vector<int> prompt_ids = standard_prompt_ids(vocab, prompt);
    Rng rng = Rng(cfg.seed).fork(0);
    const RawSample raw = run_decode(state, prompt_ids, cfg, rng);
    StandardGeneration gen;
    std::vector<int> kept;
    for (int tok : raw.tokens) {
        if (tok == Vocab::kDebug || vocab.is_tag(tok)) {
            gen.leaked = true;  // recorded and stripped from the text
            continue;
        }
        kept.push_back(tok);
    }
    gen.text = decode(kept, vocab);
    return gen;
}

std::string generate_standard(const ModelState<float>& state, const Vocab& vocab,
                              const std::string& prompt, const DecodeConfig& cfg) {
    return generate_standard_full(state, vocab, prompt, cfg).text;
}

TraceResult trace(const ModelState<float>& state, const Vocab& vocab, const std::string& prompt,
                  const DecodeConfig& cfg, int sample_base) {
    std::vector<int> ids = {Vocab::kBos, Vocab::kDebug};
    const std::vector<int> x = encode(prompt, vocab);
    ids.insert(ids.end(), x.begin(), x.end());
    return run_traced(state, vocab, ids, cfg, sample_base);
}

TraceResult remediate(const ModelState<float>& state, const Vocab& vocab,
                      const std::string& prompt, int quarantine_source, const DecodeConfig& cfg,
                      int sample_base) {
    if (quarantine_source < 0 || quarantine_source >= vocab.n_tags) {
        throw DataError("quarantine tag is not registered: source " +
                        std::to_string(quarantine_source));
    }
    std::vector<int> ids = {Vocab::kBos, Vocab::kDebug, vocab.tag_id(quarantine_source)};
    const std::vector<int> x = encode(prompt, vocab);
    ids.insert(ids.end(), x.begin(), x.end());
    return run_traced(state, vocab, ids, cfg, sample_base);
}

}  // namespace provlm
