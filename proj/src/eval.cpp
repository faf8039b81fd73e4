#include "provlm/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <thread>

#include "provlm/errors.hpp"
#include "provlm/rng.hpp"
#include "provlm/text.hpp"

namespace provlm {

namespace {

using ordered_json = nlohmann::ordered_json;

uint64_t derive_seed(uint64_t seed, uint64_t index) {
    uint64_t s = seed ^ (index * 0x9E3779B97F4A7C15ULL);
    return splitmix64(s);
}

// Deterministic parallel map: slot i always receives work(i).
template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& work) {
    const int usable = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (usable == 1) {
        for (size_t i = 0; i < n; ++i) {
            work(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(usable));
    for (int t = 0; t < usable; ++t) {
        pool.emplace_back([&, t] {
            for (size_t i = static_cast<size_t>(t); i < n; i += static_cast<size_t>(usable)) {
                work(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

std::vector<const Example*> select_heldout(const std::vector<Example>& examples, int cap,
                                           bool composites) {
    std::map<int, int> taken;
    std::vector<const Example*> out;
    for (const Example& ex : examples) {
        if (ex.split != Split::kHeldout || composites != !ex.composite_sources.empty()) {
            continue;
        }
        if (cap > 0 && taken[ex.source_id] >= cap) {
            continue;
        }
        ++taken[ex.source_id];
        out.push_back(&ex);
    }
    return out;
}

std::string first_word(const std::string& text) {
    const auto words = split_words(text);
    return words.empty() ? std::string() : words.front();
}

}  // namespace

bool normalized_exact_match(const std::string& a, const std::string& b) {
    return normalize_text(a) == normalize_text(b);
}

std::vector<GenRecord> gen_tsr_records(const ModelState<float>& state, const Vocab& vocab,
                                       const std::vector<Example>& heldout,
                                       const EvalOptions& opt) {
    const auto items = select_heldout(heldout, opt.tsr_cap_per_source, false);
    std::vector<GenRecord> records(items.size());
    parallel_for(items.size(), opt.threads, [&](size_t i) {
        DecodeConfig cfg;  // greedy, single sample
        cfg.max_new_tokens = opt.max_new_tokens;
        cfg.seed = derive_seed(opt.seed, i);
        const TraceResult tr = trace(state, vocab, items[i]->instruction, cfg);
        GenRecord& r = records[i];
        r.kind = "tsr";
        r.source_id = items[i]->source_id;
        r.prompt = items[i]->instruction;
        r.reference = items[i]->response;
        r.samples = tr.raw_samples;
        r.predicted_tags = tr.predicted_tags;
        r.refusal = tr.refusal;
    });
    return records;
}

std::vector<GenRecord> gen_utility_records(const ModelState<float>& state, const Vocab& vocab,
                                           const std::vector<Example>& heldout,
                                           const EvalOptions& opt) {
    const auto items = select_heldout(heldout, opt.utility_cap_per_source, false);
    std::vector<GenRecord> records(items.size());
    parallel_for(items.size(), opt.threads, [&](size_t i) {
        DecodeConfig cfg;
        cfg.max_new_tokens = opt.max_new_tokens;
        cfg.seed = derive_seed(opt.seed, 1000003 + i);
        const StandardGeneration gen =
            generate_standard_full(state, vocab, items[i]->instruction, cfg);
        GenRecord& r = records[i];
        r.kind = "utility";
        r.source_id = items[i]->source_id;
        r.prompt = items[i]->instruction;
        r.reference = items[i]->response;
        r.samples = {{gen.text, -1, gen.leaked}};
        r.leaked = gen.leaked;
    });
    return records;
}

std::vector<GenRecord> gen_leakage_records(const ModelState<float>& state, const Vocab& vocab,
                                           const std::vector<Example>& corpus,
                                           const EvalOptions& opt) {
    // heldout prompts first, then train prompts, cycled until the quota
    std::vector<const Example*> prompts;
    for (const Example& ex : corpus) {
        if (ex.composite_sources.empty() && ex.split == Split::kHeldout) {
            prompts.push_back(&ex);
        }
    }
    for (const Example& ex : corpus) {
        if (ex.composite_sources.empty() && ex.split == Split::kTrain) {
            prompts.push_back(&ex);
        }
    }
    if (prompts.empty()) {
        return {};
    }
    const size_t n = static_cast<size_t>(std::max(1, opt.leakage_generations));
    std::vector<GenRecord> records(n);
    parallel_for(n, opt.threads, [&](size_t i) {
        const Example& ex = *prompts[i % prompts.size()];
        DecodeConfig cfg;
        cfg.max_new_tokens = opt.max_new_tokens;
        cfg.seed = derive_seed(opt.seed, 2000003 + i);
        const StandardGeneration gen = generate_standard_full(state, vocab, ex.instruction, cfg);
        GenRecord& r = records[i];
        r.kind = "leakage";
        r.source_id = ex.source_id;
        r.prompt = ex.instruction;
        r.samples = {{gen.text, -1, gen.leaked}};
        r.leaked = gen.leaked;
    });
    return records;
}

std::vector<GenRecord> gen_intervention_records(const ModelState<float>& state, const Vocab& vocab,
                                                const std::vector<Example>& heldout,
                                                const EvalOptions& opt) {
    const auto items = select_heldout(heldout, opt.intervention_cap_per_source, false);
    std::set<int> source_set;
    for (const auto* ex : items) {
        source_set.insert(ex->source_id);
    }
    const std::vector<int> sources(source_set.begin(), source_set.end());
    std::vector<GenRecord> records(items.size() * sources.size());
    parallel_for(records.size(), opt.threads, [&](size_t idx) {
        const size_t qi = idx / items.size();
        const size_t ii = idx % items.size();
        const Example& ex = *items[ii];
        DecodeConfig cfg;
        cfg.max_new_tokens = opt.max_new_tokens;
        cfg.seed = derive_seed(opt.seed, 3000017 + idx);
        const TraceResult tr = remediate(state, vocab, ex.instruction, sources[qi], cfg);
        GenRecord& r = records[idx];
        r.kind = "intervention";
        r.source_id = ex.source_id;
        r.prompt = ex.instruction;
        r.quarantine = sources[qi];
        r.samples = tr.raw_samples;
        r.predicted_tags = tr.predicted_tags;
        r.refusal = tr.refusal;
    });
    return records;
}

std::vector<GenRecord> gen_multisource_records(const ModelState<float>& state, const Vocab& vocab,
                                               const std::vector<Example>& composites,
                                               const EvalOptions& opt) {
    std::vector<const Example*> items;
    for (const Example& ex : composites) {
        if (!ex.composite_sources.empty() && ex.split == Split::kHeldout) {
            items.push_back(&ex);
        }
    }
    std::vector<GenRecord> records(items.size());
    parallel_for(items.size(), opt.threads, [&](size_t i) {
        DecodeConfig cfg = opt.multisource;
        cfg.max_new_tokens = opt.max_new_tokens;
        cfg.seed = derive_seed(opt.seed, 4000037 + i);
        const TraceResult tr = trace(state, vocab, items[i]->instruction, cfg);
        GenRecord& r = records[i];
        r.kind = "multisource";
        r.true_sources = items[i]->composite_sources;
        std::sort(r.true_sources.begin(), r.true_sources.end());
        r.source_id = items[i]->composite_sources.front();
        r.prompt = items[i]->instruction;
        r.reference = items[i]->response;
        r.samples = tr.raw_samples;
        r.predicted_tags = tr.predicted_tags;
    });
    return records;
}

std::vector<McqItem> build_mcq_transform(const std::vector<Example>& heldout,
                                         const std::vector<SourceSpec>& specs, uint64_t seed,
                                         std::vector<int>* skipped_sources) {
    std::set<int> convertible;
    for (const SourceSpec& s : specs) {
        if (s.generator_profile == "mcq") {
            if (skipped_sources != nullptr) {
                skipped_sources->push_back(s.source_id);
            }
        } else {
            convertible.insert(s.source_id);
        }
    }
    std::map<int, std::vector<const Example*>> by_source;
    for (const Example& ex : heldout) {
        if (ex.split == Split::kHeldout && ex.composite_sources.empty() &&
            convertible.count(ex.source_id) != 0) {
            by_source[ex.source_id].push_back(&ex);
        }
    }
    Rng rng = Rng(seed).fork(41);
    std::vector<McqItem> out;
    for (const auto& [source, items] : by_source) {
        if (items.size() < 2) {
            continue;  // need a distractor from the same source
        }
        for (size_t i = 0; i < items.size(); ++i) {
            std::string correct = items[i]->response;
            std::string distract;
            for (int attempt = 0; attempt < 64; ++attempt) {
                const size_t j =
                    static_cast<size_t>(rng.uniform_int(static_cast<int>(items.size())));
                if (items[j]->response != correct) {
                    distract = items[j]->response;
                    break;
                }
            }
            if (distract.empty()) {
                continue;  // all responses identical; nothing to contrast
            }
            auto strip_period = [](std::string s) {
                if (s.size() >= 2 && s.compare(s.size() - 2, 2, " .") == 0) {
                    s.resize(s.size() - 2);
                }
                return s;
            };
            const bool correct_is_a = rng.bernoulli(0.5);
            McqItem item;
            item.correct_letter = correct_is_a ? "a" : "b";
            const std::string opt_a = strip_period(correct_is_a ? correct : distract);
            const std::string opt_b = strip_period(correct_is_a ? distract : correct);
            item.item.instruction = items[i]->instruction + " option a : " + opt_a +
                                    " . option b : " + opt_b + " . reply with just the letter .";
            item.item.response = item.correct_letter;
            item.item.source_id = source;
            item.item.split = Split::kHeldout;
            out.push_back(std::move(item));
        }
    }
    return out;
}

std::vector<GenRecord> gen_mcq_records(const ModelState<float>& state, const Vocab& vocab,
                                       const std::vector<McqItem>& items, const EvalOptions& opt) {
    std::map<int, int> taken;
    std::vector<const McqItem*> selected;
    for (const McqItem& item : items) {
        if (opt.mcq_cap_per_source > 0 && taken[item.item.source_id] >= opt.mcq_cap_per_source) {
            continue;
        }
        ++taken[item.item.source_id];
        selected.push_back(&item);
    }
    std::vector<GenRecord> records(2 * selected.size());
    parallel_for(selected.size(), opt.threads, [&](size_t i) {
        const McqItem& item = *selected[i];
        DecodeConfig cfg;
        cfg.max_new_tokens = opt.max_new_tokens;
        cfg.seed = derive_seed(opt.seed, 5000011 + i);
        const TraceResult tr = trace(state, vocab, item.item.instruction, cfg);
        GenRecord& rt = records[2 * i];
        rt.kind = "mcq_trace";
        rt.source_id = item.item.source_id;
        rt.prompt = item.item.instruction;
        rt.reference = item.correct_letter;
        rt.samples = tr.raw_samples;
        rt.predicted_tags = tr.predicted_tags;

        const StandardGeneration gen =
            generate_standard_full(state, vocab, item.item.instruction, cfg);
        GenRecord& ra = records[2 * i + 1];
        ra.kind = "mcq_answer";
        ra.source_id = item.item.source_id;
        ra.prompt = item.item.instruction;
        ra.reference = item.correct_letter;
        ra.samples = {{gen.text, -1, gen.leaked}};
        ra.leaked = gen.leaked;
    });
    return records;
}

EvalReport score_records(const std::vector<GenRecord>& records) {
    EvalReport rep;
    std::map<int, std::pair<int, int>> tsr_counts, util_counts, mcq_counts;
    int64_t leak_total = 0, leak_hits = 0;
    int mcq_answer_total = 0, mcq_answer_correct = 0;
    int ms_total = 0, ms_exact = 0, ms_recovered = 0;
    std::map<std::pair<int, int>, std::pair<int, int>> interv;  // (quarantine, source) -> (refusals, total)

    for (const GenRecord& r : records) {
        if (r.kind == "tsr") {
            auto& c = tsr_counts[r.source_id];
            c.second += 1;
            c.first += (r.predicted_tags.size() == 1 && r.predicted_tags[0] == r.source_id) ? 1 : 0;
        } else if (r.kind == "utility") {
            auto& c = util_counts[r.source_id];
            c.second += 1;
            c.first += normalized_exact_match(r.samples.front().text, r.reference) ? 1 : 0;
        } else if (r.kind == "leakage") {
            ++leak_total;
            leak_hits += r.leaked ? 1 : 0;
        } else if (r.kind == "intervention") {
            auto& c = interv[{r.quarantine, r.source_id}];
            c.second += 1;
            c.first += r.refusal ? 1 : 0;
        } else if (r.kind == "multisource") {
            ++ms_total;
            std::vector<int> truth = r.true_sources;
            std::sort(truth.begin(), truth.end());
            const bool exact = r.predicted_tags == truth;
            const bool recovered = std::includes(r.predicted_tags.begin(), r.predicted_tags.end(),
                                                 truth.begin(), truth.end());
            ms_exact += exact ? 1 : 0;
            ms_recovered += recovered ? 1 : 0;
        } else if (r.kind == "mcq_trace") {
            auto& c = mcq_counts[r.source_id];
            c.second += 1;
            c.first += (r.predicted_tags.size() == 1 && r.predicted_tags[0] == r.source_id) ? 1 : 0;
        } else if (r.kind == "mcq_answer") {
            ++mcq_answer_total;
            mcq_answer_correct +=
                first_word(r.samples.front().text) == normalize_text(r.reference) ? 1 : 0;
        }
    }

    double macro = 0;
    for (const auto& [src, c] : tsr_counts) {
        rep.per_source_tsr[src] = static_cast<double>(c.first) / c.second;
        macro += rep.per_source_tsr[src];
    }
    rep.macro_tsr = tsr_counts.empty() ? 0.0 : macro / static_cast<double>(tsr_counts.size());

    macro = 0;
    for (const auto& [src, c] : util_counts) {
        rep.utility[src] = static_cast<double>(c.first) / c.second;
        macro += rep.utility[src];
    }
    rep.utility_macro = util_counts.empty() ? 0.0 : macro / static_cast<double>(util_counts.size());

    rep.leakage_generations = leak_total;
    if (leak_total > 0) {
        rep.leakage_rate = static_cast<double>(leak_hits) / static_cast<double>(leak_total);
    } else if (std::any_of(records.begin(), records.end(),
                           [](const GenRecord& r) { return r.kind == "leakage"; })) {
        rep.leakage_rate = 0.0;
    }

    if (!interv.empty()) {
        std::set<int> srcs;
        for (const auto& [key, _] : interv) {
            srcs.insert(key.first);
            srcs.insert(key.second);
        }
        InterventionMatrix m;
        m.sources.assign(srcs.begin(), srcs.end());
        m.rates.assign(m.sources.size(), std::vector<double>(m.sources.size(), 0.0));
        for (size_t i = 0; i < m.sources.size(); ++i) {
            for (size_t j = 0; j < m.sources.size(); ++j) {
                const auto it = interv.find({m.sources[i], m.sources[j]});
                if (it != interv.end() && it->second.second > 0) {
                    m.rates[i][j] =
                        static_cast<double>(it->second.first) / it->second.second;
                }
            }
        }
        rep.intervention = std::move(m);
    }

    rep.multisource_count = ms_total;
    if (ms_total > 0) {
        rep.multisource_tsr_exact = static_cast<double>(ms_exact) / ms_total;
        rep.multisource_recovery = static_cast<double>(ms_recovered) / ms_total;
    }

    if (!mcq_counts.empty()) {
        macro = 0;
        for (const auto& [src, c] : mcq_counts) {
            rep.mcq_tsr[src] = static_cast<double>(c.first) / c.second;
            macro += rep.mcq_tsr[src];
        }
        rep.mcq_tsr_macro = macro / static_cast<double>(mcq_counts.size());
    }
    if (mcq_answer_total > 0) {
        rep.mcq_accuracy = static_cast<double>(mcq_answer_correct) / mcq_answer_total;
    }
    return rep;
}

nlohmann::ordered_json score_baselines(const SourceIndex& index, const NgramClassifier* clf,
                                       const std::vector<GenRecord>& records) {
    struct MethodCounts {
        std::map<int, std::pair<int, int>> per_source;
    };
    const std::vector<std::string> methods = {"bm25", "rouge_l", "tfidf_knn", "classifier"};
    std::map<std::string, std::map<std::string, MethodCounts>> buckets;  // group -> method

    for (const GenRecord& r : records) {
        std::string group;
        if (r.kind == "utility") {
            group = "tsr";
        } else if (r.kind == "mcq_answer") {
            group = "mcq";
        } else {
            continue;
        }
        const std::string& text = r.samples.front().text;
        for (const std::string& method : methods) {
            if (method == "classifier" && clf == nullptr) {
                continue;
            }
            std::optional<int> pred;
            if (method == "bm25") {
                pred = bm25_attribute(index, text);
            } else if (method == "rouge_l") {
                pred = rouge_l_attribute(index, text);
            } else if (method == "tfidf_knn") {
                pred = tfidf_knn_attribute(index, text);
            } else {
                pred = classify(*clf, text);
            }
            auto& c = buckets[group][method].per_source[r.source_id];
            c.second += 1;
            c.first += (pred.has_value() && *pred == r.source_id) ? 1 : 0;
        }
    }

    ordered_json out;
    for (const auto& [group, per_method] : buckets) {
        ordered_json g;
        for (const auto& [method, counts] : per_method) {
            ordered_json per_source;
            double macro = 0;
            for (const auto& [src, c] : counts.per_source) {
                const double tsr = static_cast<double>(c.first) / c.second;
                per_source[std::to_string(src)] = tsr;
                macro += tsr;
            }
            ordered_json m;
            m["per_source_tsr"] = per_source;
            m["macro_tsr"] =
                counts.per_source.empty() ? 0.0 : macro / static_cast<double>(counts.per_source.size());
            g[method] = m;
        }
        out[group] = g;
    }
    return out;
}

ordered_json EvalReport::to_json() const {
    ordered_json j;
    ordered_json tsr;
    for (const auto& [src, v] : per_source_tsr) {
        tsr[std::to_string(src)] = v;
    }
    j["per_source_tsr"] = tsr;
    j["macro_tsr"] = macro_tsr;
    ordered_json util;
    for (const auto& [src, v] : utility) {
        util[std::to_string(src)] = v;
    }
    j["utility"] = util;
    j["utility_macro"] = utility_macro;
    if (intervention) {
        ordered_json m;
        m["sources"] = intervention->sources;
        m["rates"] = intervention->rates;
        j["intervention"] = m;
    }
    if (leakage_rate) {
        j["leakage_rate"] = *leakage_rate;
        j["leakage_generations"] = leakage_generations;
    }
    if (multisource_count > 0) {
        ordered_json m;
        m["count"] = multisource_count;
        m["exact"] = *multisource_tsr_exact;
        m["recovery"] = *multisource_recovery;
        j["multisource"] = m;
    }
    if (mcq_tsr_macro) {
        ordered_json m;
        ordered_json per;
        for (const auto& [src, v] : mcq_tsr) {
            per[std::to_string(src)] = v;
        }
        m["per_source_tsr"] = per;
        m["macro_tsr"] = *mcq_tsr_macro;
        if (mcq_accuracy) {
            m["accuracy"] = *mcq_accuracy;
        }
        j["mcq"] = m;
    }
    if (!baselines.is_null()) {
        j["baselines"] = baselines;
    }
    return j;
}

void write_records_jsonl(const std::vector<GenRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write generation dump: " + path);
    }
    for (const GenRecord& r : records) {
        ordered_json j;
        j["kind"] = r.kind;
        j["source_id"] = r.source_id;
        if (!r.true_sources.empty()) {
            j["true_sources"] = r.true_sources;
        }
        j["prompt"] = r.prompt;
        if (!r.reference.empty()) {
            j["reference"] = r.reference;
        }
        if (r.quarantine >= 0) {
            j["quarantine"] = r.quarantine;
        }
        ordered_json samples = ordered_json::array();
        for (const SampleOutput& s : r.samples) {
            ordered_json sj;
            sj["text"] = s.text;
            sj["tag"] = s.tag_source;
            sj["leaked"] = s.leaked;
            samples.push_back(sj);
        }
        j["samples"] = samples;
        j["predicted_tags"] = r.predicted_tags;
        j["refusal"] = r.refusal;
        j["leaked"] = r.leaked;
        out << j.dump() << "\n";
    }
}

std::vector<GenRecord> load_records_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open generation dump: " + path);
    }
    std::vector<GenRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        GenRecord r;
        r.kind = j.at("kind").get<std::string>();
        r.source_id = j.at("source_id").get<int>();
        if (j.contains("true_sources")) {
            r.true_sources = j["true_sources"].get<std::vector<int>>();
        }
        r.prompt = j.at("prompt").get<std::string>();
        if (j.contains("reference")) {
            r.reference = j["reference"].get<std::string>();
        }
        if (j.contains("quarantine")) {
            r.quarantine = j["quarantine"].get<int>();
        }
        for (const auto& sj : j.at("samples")) {
            SampleOutput s;
            s.text = sj.at("text").get<std::string>();
            s.tag_source = sj.at("tag").get<int>();
            s.leaked = sj.at("leaked").get<bool>();
            r.samples.push_back(std::move(s));
        }
        r.predicted_tags = j.at("predicted_tags").get<std::vector<int>>();
        r.refusal = j.at("refusal").get<bool>();
        r.leaked = j.at("leaked").get<bool>();
        out.push_back(std::move(r));
    }
    return out;
}

void write_intervention_csv(const InterventionMatrix& matrix, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write intervention matrix: " + path);
    }
    out << "quarantine_tag";
    for (int s : matrix.sources) {
        out << ",source_" << s;
    }
    out << "\n";
    for (size_t i = 0; i < matrix.sources.size(); ++i) {
        out << matrix.sources[i];
        for (size_t jx = 0; jx < matrix.sources.size(); ++jx) {
            out << "," << matrix.rates[i][jx];
        }
        out << "\n";
    }
}

}  // namespace provlm
