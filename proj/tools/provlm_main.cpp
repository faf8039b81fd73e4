#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "provlm/baselines.hpp"
#include "provlm/config.hpp"
#include "provlm/corpus.hpp"
#include "provlm/decode.hpp"
#include "provlm/errors.hpp"
#include "provlm/eval.hpp"
#include "provlm/instances.hpp"
#include "provlm/model.hpp"
#include "provlm/tokenizer.hpp"
#include "provlm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace provlm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void ensure_parent_dir(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
}

ordered_json trace_result_json(const TraceResult& result, const Vocab& vocab) {
    ordered_json j;
    j["response"] = result.response_text;
    j["predicted_tags"] = result.predicted_tags;
    ordered_json literals = ordered_json::array();
    for (int s : result.predicted_tags) {
        literals.push_back(vocab.tag_literal(s));
    }
    j["predicted_tag_literals"] = literals;
    j["refusal"] = result.refusal;
    ordered_json samples = ordered_json::array();
    for (const SampleOutput& s : result.raw_samples) {
        ordered_json sj;
        sj["text"] = s.text;
        sj["tag"] = s.tag_source;
        samples.push_back(sj);
    }
    j["samples"] = samples;
    return j;
}

int tag_literal_to_source(const Vocab& vocab, const std::string& literal) {
    const auto it = vocab.token_to_id.find(literal);
    if (it == vocab.token_to_id.end() || !vocab.is_tag(it->second)) {
        throw DataError("unregistered quarantine tag: " + literal);
    }
    return vocab.tag_source(it->second);
}

struct DecodeFlags {
    int samples = 1;
    double temperature = 1.0;
    double top_p = 0.95;
    int max_new_tokens = 48;
    uint64_t seed = 7;
    bool force_sample = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--samples", samples, "number of stochastic samples");
        cmd->add_option("--temp", temperature, "sampling temperature");
        cmd->add_option("--top-p", top_p, "nucleus sampling mass");
        cmd->add_option("--max-new-tokens", max_new_tokens, "generation budget");
        cmd->add_option("--seed", seed, "sampling seed");
        cmd->add_flag("--sample", force_sample, "sample even with --samples 1");
    }

    DecodeConfig to_config() const {
        DecodeConfig cfg;
        cfg.strategy = (samples > 1 || force_sample) ? DecodeConfig::Strategy::kSample
                                                     : DecodeConfig::Strategy::kGreedy;
        cfg.temperature = temperature;
        cfg.top_p = top_p;
        cfg.max_new_tokens = max_new_tokens;
        cfg.n_samples = samples;
        cfg.seed = seed;
        return cfg;
    }
};

int cmd_gen_corpus(const std::string& config_path) {
    const RunConfig cfg = load_run_config(config_path);
    fs::create_directories(cfg.out_dir);
    echo_run_config(cfg, cfg.out_dir + "/config.cfg");

    std::vector<int> counts;
    counts.reserve(cfg.sources.size());
    for (const SourceSpec& s : cfg.sources) {
        counts.push_back(s.stage >= 2 ? cfg.stage2_count : cfg.per_source_count);
    }
    CorpusOptions opts;
    opts.bio_authors = cfg.bio_authors;
    opts.two_part_fraction = cfg.two_part_fraction;
    std::vector<Example> corpus = generate_synthetic_corpus(cfg.sources, counts, cfg.seed, opts);
    if (!cfg.fine_grained && cfg.composite_count > 0 && cfg.sources.size() >= 2) {
        const auto composites = generate_composite_queries(corpus, cfg.composite_count, cfg.seed);
        corpus.insert(corpus.end(), composites.begin(), composites.end());
    }
    ensure_parent_dir(cfg.corpus_path);
    write_corpus_jsonl(corpus, cfg.corpus_path);
    const Vocab vocab = build_vocab(corpus, cfg.sources);
    ensure_parent_dir(cfg.vocab_path);
    save_vocab(vocab, cfg.vocab_path);
    std::cout << "wrote " << corpus.size() << " examples to " << cfg.corpus_path << " and "
              << vocab.size() << " tokens to " << cfg.vocab_path << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, bool control) {
    const RunConfig cfg = load_run_config(config_path);
    const std::vector<Example> corpus = load_corpus_jsonl(cfg.corpus_path);
    const Vocab vocab = load_vocab(cfg.vocab_path);
    TrainPlan plan = cfg.train_plan();
    plan.out_dir = cfg.out_dir + (control ? "/control" : "/tagged");
    fs::create_directories(plan.out_dir);
    echo_run_config(cfg, plan.out_dir + "/config.cfg");
    const ModelState<float> state = control ? run_control_pipeline(plan, corpus, vocab)
                                            : run_pipeline(plan, corpus, vocab);
    std::cout << "trained " << (control ? "control" : "tagged") << " model for " << state.step
              << " steps; final checkpoint at " << plan.out_dir << "/final.ckpt\n";
    return kExitOk;
}

int cmd_trace(const std::string& checkpoint, const std::string& vocab_path,
              const std::string& prompt, const DecodeFlags& flags) {
    const Vocab vocab = load_vocab(vocab_path);
    const ModelState<float> state = load_checkpoint(checkpoint, vocab.fingerprint);
    const TraceResult result = trace(state, vocab, prompt, flags.to_config());
    std::cout << trace_result_json(result, vocab).dump(2) << "\n";
    return kExitOk;
}

int cmd_remediate(const std::string& checkpoint, const std::string& vocab_path,
                  const std::string& prompt, const std::string& quarantine,
                  const DecodeFlags& flags) {
    const Vocab vocab = load_vocab(vocab_path);
    const ModelState<float> state = load_checkpoint(checkpoint, vocab.fingerprint);
    const int source = tag_literal_to_source(vocab, quarantine);
    const TraceResult result = remediate(state, vocab, prompt, source, flags.to_config());
    ordered_json j = trace_result_json(result, vocab);
    j["quarantine"] = quarantine;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint, bool mcq,
             bool fine_grained, bool multisource, const std::string& out_override) {
    const RunConfig cfg = load_run_config(config_path);
    const std::vector<Example> corpus = load_corpus_jsonl(cfg.corpus_path);
    const Vocab vocab = load_vocab(cfg.vocab_path);
    const ModelState<float> state = load_checkpoint(checkpoint, vocab.fingerprint);
    const std::string out_dir = out_override.empty() ? cfg.out_dir + "/eval" : out_override;
    fs::create_directories(out_dir);
    echo_run_config(cfg, out_dir + "/config.cfg");

    EvalOptions opt = cfg.eval;
    opt.threads = cfg.resolved_threads();

    std::vector<GenRecord> records = gen_tsr_records(state, vocab, corpus, opt);
    {
        const auto util = gen_utility_records(state, vocab, corpus, opt);
        records.insert(records.end(), util.begin(), util.end());
        const auto leak = gen_leakage_records(state, vocab, corpus, opt);
        records.insert(records.end(), leak.begin(), leak.end());
    }
    if (!fine_grained) {
        const auto interv = gen_intervention_records(state, vocab, corpus, opt);
        records.insert(records.end(), interv.begin(), interv.end());
    }
    const auto ms = gen_multisource_records(state, vocab, corpus, opt);
    if (multisource && ms.empty()) {
        throw DataError("--multisource requested but the corpus has no composite queries");
    }
    records.insert(records.end(), ms.begin(), ms.end());
    if (mcq) {
        std::vector<int> skipped;
        const auto items = build_mcq_transform(corpus, cfg.sources, cfg.eval.seed, &skipped);
        for (int s : skipped) {
            std::cerr << "notice: source " << s << " is already multiple choice; skipped\n";
        }
        const auto mcq_records = gen_mcq_records(state, vocab, items, opt);
        records.insert(records.end(), mcq_records.begin(), mcq_records.end());
    }

    write_records_jsonl(records, out_dir + "/generations.jsonl");
    const EvalReport report = score_records(records);
    std::ofstream rout(out_dir + "/report.json", std::ios::binary);
    rout << report.to_json().dump(2) << "\n";
    if (report.intervention) {
        write_intervention_csv(*report.intervention, out_dir + "/intervention_matrix.csv");
    }
    std::cout << report.to_json().dump(2) << "\n";
    return kExitOk;
}

int cmd_baselines(const std::string& corpus_path, const std::string& dump_path,
                  const std::string& out_dir, uint64_t seed, const std::string& merge_report,
                  const std::string& index_out) {
    const std::vector<Example> corpus = load_corpus_jsonl(corpus_path);
    int n_sources = 0;
    for (const Example& ex : corpus) {
        n_sources = std::max(n_sources, ex.source_id + 1);
    }
    const SourceIndex index = build_source_index(corpus, n_sources);
    if (!index_out.empty()) {
        ensure_parent_dir(index_out);
        save_index(index, index_out);
    }
    const NgramClassifier clf = train_ngram_classifier(corpus, n_sources, seed);
    const std::vector<GenRecord> records = load_records_jsonl(dump_path);
    const ordered_json table = score_baselines(index, &clf, records);

    fs::create_directories(out_dir);
    std::ofstream csv(out_dir + "/baseline_tsr.csv", std::ios::binary);
    csv << "group,method,source_id,tsr\n";
    for (const auto& [group, methods] : table.items()) {
        for (const auto& [method, stats] : methods.items()) {
            for (const auto& [src, tsr] : stats.at("per_source_tsr").items()) {
                csv << group << "," << method << "," << src << "," << tsr.dump() << "\n";
            }
            csv << group << "," << method << ",macro," << stats.at("macro_tsr").dump() << "\n";
        }
    }
    if (!merge_report.empty()) {
        std::ifstream rin(merge_report);
        if (!rin) {
            throw DataError("cannot open report to merge: " + merge_report);
        }
        ordered_json report = ordered_json::parse(rin);
        report["baselines"] = table;
        std::ofstream rout(merge_report, std::ios::binary);
        rout << report.dump(2) << "\n";
    }
    std::cout << table.dump(2) << "\n";
    return kExitOk;
}

int cmd_dump_instances(const std::string& config_path, const std::string& out_path, int stage) {
    const RunConfig cfg = load_run_config(config_path);
    const std::vector<Example> corpus = load_corpus_jsonl(cfg.corpus_path);
    const Vocab vocab = load_vocab(cfg.vocab_path);
    std::vector<Example> stage_examples;
    for (const Example& ex : corpus) {
        if (ex.composite_sources.empty() && ex.source_id < static_cast<int>(cfg.sources.size()) &&
            cfg.sources[static_cast<size_t>(ex.source_id)].stage == stage) {
            stage_examples.push_back(ex);
        }
    }
    const auto instances =
        build_epoch(stage_examples, vocab, cfg.model.context_len, cfg.mix, cfg.seed);
    ensure_parent_dir(out_path);
    dump_instances_jsonl(instances, out_path);
    std::cout << "wrote " << instances.size() << " instances to " << out_path << "\n";
    return kExitOk;
}

int cmd_repl(const std::string& checkpoint, const std::string& vocab_path) {
    const Vocab vocab = load_vocab(vocab_path);
    const ModelState<float> state = load_checkpoint(checkpoint, vocab.fingerprint);
    DecodeConfig cfg;  // greedy single sample
    std::optional<int> quarantine;

    std::cout << "provlm repl. :quarantine <TAG>, :unquarantine, :quit\n";
    std::string line;
    while (true) {
        std::cout << "> " << std::flush;
        if (!std::getline(std::cin, line)) {
            break;
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == ':') {
            if (line == ":quit" || line == ":q") {
                break;
            }
            if (line == ":unquarantine") {
                quarantine.reset();
                std::cout << "quarantine cleared\n";
                continue;
            }
            if (line.rfind(":quarantine ", 0) == 0) {
                try {
                    quarantine = tag_literal_to_source(vocab, line.substr(12));
                    std::cout << "quarantining " << vocab.tag_literal(*quarantine) << "\n";
                } catch (const DataError& e) {
                    std::cout << "error: " << e.what() << "\n";
                }
                continue;
            }
            std::cout << "unknown directive: " << line << "\n";
            continue;
        }
        try {
            if (quarantine) {
                const TraceResult r = remediate(state, vocab, line, *quarantine, cfg);
                std::cout << "remediated [" << vocab.tag_literal(*quarantine)
                          << "]: " << r.response_text << (r.refusal ? "  (refused)" : "") << "\n";
            } else {
                const std::string standard = generate_standard(state, vocab, line, cfg);
                const TraceResult r = trace(state, vocab, line, cfg);
                std::cout << "standard: " << standard << "\n";
                std::cout << "debug:    " << r.response_text << "\n";
                std::cout << "tag:      "
                          << (r.predicted_tags.empty() ? std::string("(none)")
                                                       : vocab.tag_literal(r.predicted_tags[0]))
                          << "\n";
            }
        } catch (const std::exception& e) {
            std::cout << "error: " << e.what() << "\n";
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"provlm: dataset-tag provenance tracing for a desk-scale language model"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, vocab_path, prompt, quarantine, corpus_path, dump_path;
    std::string out_dir, merge_report, index_out, instances_out;
    bool control = false, mcq = false, fine_grained = false, multisource = false;
    uint64_t seed = 7;
    int stage = 1;
    DecodeFlags flags;

    auto* gen = app.add_subcommand("gen-corpus", "generate corpus JSONL + vocab file");
    gen->add_option("--config", config_path, "run config file")->required();

    auto* train = app.add_subcommand("train", "run the multi-stage training pipeline");
    train->add_option("--config", config_path, "run config file")->required();
    train->add_flag("--control", control, "train the no-tag control model (beta = gamma = 0)");

    auto* trace_cmd = app.add_subcommand("trace", "debug-mode provenance trace for one prompt");
    trace_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    trace_cmd->add_option("--vocab", vocab_path, "vocab file")->required();
    trace_cmd->add_option("--prompt", prompt, "user prompt")->required();
    flags.attach(trace_cmd);

    auto* rem = app.add_subcommand("remediate", "tag-conditioned quarantined generation");
    rem->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    rem->add_option("--vocab", vocab_path, "vocab file")->required();
    rem->add_option("--prompt", prompt, "user prompt")->required();
    rem->add_option("--quarantine", quarantine, "tag literal to suppress, e.g. <SRC_1>")
        ->required();
    flags.attach(rem);

    auto* eval_cmd = app.add_subcommand("eval", "full metric suite over the heldout corpus");
    eval_cmd->add_option("--config", config_path, "run config file")->required();
    eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--out", out_dir, "output directory (default <out_dir>/eval)");
    eval_cmd->add_flag("--mcq", mcq, "add the 2-way multiple-choice format perturbation");
    eval_cmd->add_flag("--fine-grained", fine_grained, "per-author evaluation; skips the matrix");
    eval_cmd->add_flag("--multisource", multisource, "require composite multi-source queries");

    auto* base = app.add_subcommand("baselines", "post-hoc attribution over a generation dump");
    base->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    base->add_option("--dump", dump_path, "generations JSONL from eval")->required();
    base->add_option("--out", out_dir, "output directory")->required();
    base->add_option("--seed", seed, "classifier training seed");
    base->add_option("--merge-report", merge_report, "report.json to merge the table into");
    base->add_option("--save-index", index_out, "persist the retrieval index");

    auto* dump_inst = app.add_subcommand("dump-instances", "write training instances as JSONL");
    dump_inst->add_option("--config", config_path, "run config file")->required();
    dump_inst->add_option("--out", instances_out, "output JSONL path")->required();
    dump_inst->add_option("--stage", stage, "stage index (default 1)");

    auto* repl = app.add_subcommand("repl", "interactive debug console");
    repl->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    repl->add_option("--vocab", vocab_path, "vocab file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_corpus(config_path);
        }
        if (train->parsed()) {
            return cmd_train(config_path, control);
        }
        if (trace_cmd->parsed()) {
            return cmd_trace(checkpoint, vocab_path, prompt, flags);
        }
        if (rem->parsed()) {
            return cmd_remediate(checkpoint, vocab_path, prompt, quarantine, flags);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(config_path, checkpoint, mcq, fine_grained, multisource, out_dir);
        }
        if (base->parsed()) {
            return cmd_baselines(corpus_path, dump_path, out_dir, seed, merge_report, index_out);
        }
        if (dump_inst->parsed()) {
            return cmd_dump_instances(config_path, instances_out, stage);
        }
        if (repl->parsed()) {
            return cmd_repl(checkpoint, vocab_path);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
