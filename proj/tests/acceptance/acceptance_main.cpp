// Acceptance suite: trains the reference desk-scale models end to end and
// checks every release criterion at its pinned threshold, one line per
// criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "provlm/baselines.hpp"
#include "provlm/config.hpp"
#include "provlm/corpus.hpp"
#include "provlm/decode.hpp"
#include "provlm/errors.hpp"
#include "provlm/eval.hpp"
#include "provlm/instances.hpp"
#include "provlm/model.hpp"
#include "provlm/rng.hpp"
#include "provlm/text.hpp"
#include "provlm/tokenizer.hpp"
#include "provlm/trainer.hpp"

namespace fs = std::filesystem;
using namespace provlm;

namespace {

int g_failures = 0;

void criterion(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d  %-22s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++g_failures;
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

int hw_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// ---------------------------------------------------------------------------
// criterion 1: analytic gradients vs central finite differences

bool model_gradient_check(std::string& detail) {
    std::vector<SourceSpec> specs = {{0, "medical", "<SRC_0>", 1, "medical"},
                                     {1, "hazard", "<SRC_1>", 1, "hazard"}};
    const auto corpus = generate_synthetic_corpus(specs, 24, 5);
    const Vocab vocab = build_vocab(corpus, specs);
    ModelConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.context_len = 64;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.numeric_mode = NumericMode::kCheck64;
    auto state = init_model<double>(cfg, 101, vocab.fingerprint);

    MixConfig mix{1.0, 1.0, 0.5};
    auto batch = build_epoch(corpus, vocab, cfg.context_len, mix, 7);
    batch.resize(4);
    const LossWeights weights{1.0, 1.0};
    Params<double> grads;
    loss_and_grads(state, batch, weights, &grads);

    std::vector<Mat<double>*> tensors;
    std::vector<std::string> names;
    state.params.visit([&](const std::string& n, Mat<double>& m) {
        tensors.push_back(&m);
        names.push_back(n);
    });
    std::vector<const Mat<double>*> gs;
    grads.visit([&](const std::string&, const Mat<double>& m) { gs.push_back(&m); });

    const double h = 1e-5;
    Rng rng(4242);
    int checked = 0;
    double worst = 0;
    for (size_t ti = 0; ti < tensors.size(); ++ti) {
        Mat<double>& tensor = *tensors[ti];
        for (int c = 0; c < 8; ++c) {
            Eigen::Index r =
                static_cast<Eigen::Index>(rng.uniform_u64(static_cast<uint64_t>(tensor.rows())));
            const Eigen::Index col =
                static_cast<Eigen::Index>(rng.uniform_u64(static_cast<uint64_t>(tensor.cols())));
            if (names[ti] == "tok_emb" && c < 4) {
                const auto& ids = batch[static_cast<size_t>(c) % batch.size()].input_ids;
                r = ids[rng.uniform_u64(ids.size())];
            }
            if (names[ti] == "pos_emb") {
                r = static_cast<Eigen::Index>(rng.uniform_u64(batch[0].input_ids.size()));
            }
            const double keep = tensor(r, col);
            tensor(r, col) = keep + h;
            const double up = loss_and_grads<double>(state, batch, weights, nullptr).loss;
            tensor(r, col) = keep - h;
            const double down = loss_and_grads<double>(state, batch, weights, nullptr).loss;
            tensor(r, col) = keep;
            const double fd = (up - down) / (2 * h);
            const double an = (*gs[ti])(r, col);
            const double diff = std::abs(fd - an);
            ++checked;
            if (diff > 1e-10) {
                worst = std::max(worst, diff / std::max(std::abs(fd), std::abs(an)));
            }
        }
    }
    detail = "model: " + std::to_string(checked) + " coords, worst rel err " + fmt(worst);
    return checked >= 200 && worst < 1e-4;
}

bool logistic_gradient_check(std::string& detail) {
    NgramClassifier clf;
    clf.n_classes = 4;
    clf.dim = 128;
    clf.w = Mat<double>::Zero(clf.dim, clf.n_classes);
    clf.b = Mat<double>::Zero(1, clf.n_classes);
    Rng rng(17);
    for (int i = 0; i < clf.dim; ++i) {
        for (int c = 0; c < clf.n_classes; ++c) {
            clf.w(i, c) = rng.normal(0, 0.4);
        }
    }
    std::vector<std::vector<std::pair<int, double>>> feats;
    std::vector<int> labels;
    for (int i = 0; i < 16; ++i) {
        std::vector<std::pair<int, double>> f;
        for (int k = 0; k < 8; ++k) {
            f.emplace_back(rng.uniform_int(clf.dim), 0.5 + rng.uniform_double());
        }
        std::sort(f.begin(), f.end());
        feats.push_back(std::move(f));
        labels.push_back(rng.uniform_int(clf.n_classes));
    }
    Mat<double> gw, gb;
    classifier_loss_and_grads(clf, feats, labels, &gw, &gb);
    const double h = 1e-5;
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const bool bias = trial % 10 == 0;
        const int r = bias ? 0 : rng.uniform_int(clf.dim);
        const int c = rng.uniform_int(clf.n_classes);
        Mat<double>& target = bias ? clf.b : clf.w;
        const double keep = target(r, c);
        target(r, c) = keep + h;
        const double up = classifier_loss_and_grads(clf, feats, labels, nullptr, nullptr);
        target(r, c) = keep - h;
        const double down = classifier_loss_and_grads(clf, feats, labels, nullptr, nullptr);
        target(r, c) = keep;
        const double fd = (up - down) / (2 * h);
        const double an = bias ? gb(r, c) : gw(r, c);
        if (std::abs(fd - an) > 1e-11) {
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)));
        }
    }
    detail += "; logistic: worst rel err " + fmt(worst);
    return worst < 1e-6;
}

// ---------------------------------------------------------------------------
// criterion 8: oracle equivalence on the micro-corpus fixture set

double oracle_bm25(const std::vector<std::vector<std::string>>& source_docs,
                   const std::vector<std::string>& doc_tokens,
                   const std::vector<std::string>& query) {
    const double k1 = 1.5, b = 0.75;
    const double n = static_cast<double>(source_docs.size());
    double avgdl = 0;
    for (const auto& d : source_docs) {
        avgdl += static_cast<double>(d.size());
    }
    avgdl /= n;
    double score = 0;
    for (const std::string& term : query) {
        int df = 0;
        for (const auto& d : source_docs) {
            df += std::find(d.begin(), d.end(), term) != d.end() ? 1 : 0;
        }
        if (df == 0) {
            continue;
        }
        const double tf =
            static_cast<double>(std::count(doc_tokens.begin(), doc_tokens.end(), term));
        if (tf == 0) {
            continue;
        }
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        score += idf * tf * (k1 + 1.0) /
                 (tf + k1 * (1.0 - b + b * static_cast<double>(doc_tokens.size()) / avgdl));
    }
    return score;
}

double oracle_rouge(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    if (cand.empty() || ref.empty()) {
        return 0.0;
    }
    std::vector<std::vector<int>> dp(cand.size() + 1, std::vector<int>(ref.size() + 1, 0));
    for (size_t i = 1; i <= cand.size(); ++i) {
        for (size_t j = 1; j <= ref.size(); ++j) {
            dp[i][j] = cand[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1
                                                 : std::max(dp[i - 1][j], dp[i][j - 1]);
        }
    }
    const double lcs = dp[cand.size()][ref.size()];
    if (lcs == 0) {
        return 0.0;
    }
    const double p = lcs / static_cast<double>(cand.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

bool oracle_equivalence(std::string& detail) {
    static const std::vector<std::string> words = {"cat", "sat", "dog", "ran", "mat",
                                                   "hat", "fly", "sun", "moon"};
    Rng rng(909);
    int compared = 0;
    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
        const int n_sources = 2 + rng.uniform_int(2);
        std::vector<Example> corpus;
        std::vector<std::vector<std::vector<std::string>>> by_source(
            static_cast<size_t>(n_sources));
        for (int s = 0; s < n_sources; ++s) {
            const int n_docs = 1 + rng.uniform_int(4);  // <= 5 docs
            for (int d = 0; d < n_docs; ++d) {
                std::string text;
                const int len = 1 + rng.uniform_int(6);
                for (int t = 0; t < len; ++t) {
                    if (t > 0) {
                        text += " ";
                    }
                    text +=
                        words[static_cast<size_t>(rng.uniform_int(static_cast<int>(words.size())))];
                }
                Example ex;
                ex.instruction = "q";
                ex.response = text;
                ex.source_id = s;
                ex.split = Split::kTrain;
                corpus.push_back(ex);
                by_source[static_cast<size_t>(s)].push_back(split_words(text));
            }
        }
        const SourceIndex index = build_source_index(corpus, n_sources);
        const std::vector<std::vector<std::string>> queries = {
            {"cat"}, {"cat", "sat", "sat"}, {"moon", "sun", "fly", "dog"}};
        for (const auto& q : queries) {
            for (int s = 0; s < n_sources; ++s) {
                for (size_t d = 0; d < by_source[static_cast<size_t>(s)].size(); ++d) {
                    const double got = bm25_score(index, s, d, q);
                    const double want = oracle_bm25(by_source[static_cast<size_t>(s)],
                                                    by_source[static_cast<size_t>(s)][d], q);
                    ok = ok && got == want;
                    const double rg = rouge_l_f1(q, by_source[static_cast<size_t>(s)][d]);
                    const double rw = oracle_rouge(q, by_source[static_cast<size_t>(s)][d]);
                    ok = ok && rg == rw;
                    compared += 2;
                }
            }
        }
    }
    detail = std::to_string(compared) + " score pairs compared exactly";
    return ok && compared > 200;
}

// ---------------------------------------------------------------------------

struct CoarseRun {
    std::vector<SourceSpec> specs;
    std::vector<Example> corpus;
    Vocab vocab;
    ModelState<float> tagged;
    ModelState<float> control;
    EvalOptions opt;
    EvalReport report;
    std::vector<GenRecord> mcq_records;
    EvalReport control_report;
    double multisource_recovery_default = 0;
    double multisource_recovery_cold = 0;
    nlohmann::ordered_json baseline_table;
};

TrainPlan coarse_plan(const ModelConfig& model, uint64_t seed) {
    TrainPlan plan;
    plan.model = model;
    plan.stages = {{1, {0, 1, 2, 3}, 8, 3e-3, 32}, {2, {4}, 4, 8e-4, 32}};
    plan.mix = {1.0, 1.0, 0.5};
    plan.seed = seed;
    plan.threads = hw_threads();
    return plan;
}

CoarseRun run_coarse(const fs::path& workdir) {
    CoarseRun run;
    run.specs = default_registry();
    const int per_source = 800, stage2 = 400, composites = 120;
    std::vector<int> counts;
    for (const SourceSpec& s : run.specs) {
        counts.push_back(s.stage >= 2 ? stage2 : per_source);
    }
    run.corpus = generate_synthetic_corpus(run.specs, counts, 7);
    const auto comp = generate_composite_queries(run.corpus, composites, 7);
    run.corpus.insert(run.corpus.end(), comp.begin(), comp.end());
    run.vocab = build_vocab(run.corpus, run.specs);

    ModelConfig model;
    model.vocab_size = run.vocab.size();
    model.context_len = 128;
    model.d_model = 128;
    model.n_layers = 4;
    model.n_heads = 4;
    model.d_ff = 512;

    TrainPlan plan = coarse_plan(model, 7);
    plan.out_dir = (workdir / "coarse_tagged").string();
    std::printf("-- training tagged model (%d+%d train pairs, %d stages)\n", 4 * per_source,
                stage2, static_cast<int>(plan.stages.size()));
    std::fflush(stdout);
    run.tagged = run_pipeline(plan, run.corpus, run.vocab);

    TrainPlan control_plan = coarse_plan(model, 7);
    control_plan.out_dir = (workdir / "coarse_control").string();
    std::printf("-- training control model (beta = gamma = 0)\n");
    std::fflush(stdout);
    run.control = run_control_pipeline(control_plan, run.corpus, run.vocab);

    run.opt.seed = 7;
    run.opt.threads = hw_threads();
    run.opt.leakage_generations = 1000;
    run.opt.intervention_cap_per_source = 80;

    std::printf("-- evaluating tagged model\n");
    std::fflush(stdout);
    std::vector<GenRecord> records = gen_tsr_records(run.tagged, run.vocab, run.corpus, run.opt);
    {
        const auto util = gen_utility_records(run.tagged, run.vocab, run.corpus, run.opt);
        records.insert(records.end(), util.begin(), util.end());
        const auto leak = gen_leakage_records(run.tagged, run.vocab, run.corpus, run.opt);
        records.insert(records.end(), leak.begin(), leak.end());
        const auto iv = gen_intervention_records(run.tagged, run.vocab, run.corpus, run.opt);
        records.insert(records.end(), iv.begin(), iv.end());
        const auto ms = gen_multisource_records(run.tagged, run.vocab, run.corpus, run.opt);
        records.insert(records.end(), ms.begin(), ms.end());
    }
    std::vector<int> skipped;
    const auto mcq_items = build_mcq_transform(run.corpus, run.specs, 7, &skipped);
    run.mcq_records = gen_mcq_records(run.tagged, run.vocab, mcq_items, run.opt);
    records.insert(records.end(), run.mcq_records.begin(), run.mcq_records.end());
    write_records_jsonl(records, (workdir / "coarse_generations.jsonl").string());
    run.report = score_records(records);
    run.multisource_recovery_default = run.report.multisource_recovery.value_or(0.0);

    // near-greedy multisource ablation (temperature 0.01)
    EvalOptions cold = run.opt;
    cold.multisource.temperature = 0.01;
    const auto ms_cold = gen_multisource_records(run.tagged, run.vocab, run.corpus, cold);
    run.multisource_recovery_cold = score_records(ms_cold).multisource_recovery.value_or(0.0);

    std::printf("-- evaluating control model\n");
    std::fflush(stdout);
    const auto control_util = gen_utility_records(run.control, run.vocab, run.corpus, run.opt);
    run.control_report = score_records(control_util);

    std::printf("-- post-hoc baselines\n");
    std::fflush(stdout);
    const SourceIndex index = build_source_index(run.corpus, static_cast<int>(run.specs.size()));
    const NgramClassifier clf =
        train_ngram_classifier(run.corpus, static_cast<int>(run.specs.size()), 7);
    run.baseline_table = score_baselines(index, &clf, records);

    std::ofstream rout((workdir / "coarse_report.json").string(), std::ios::binary);
    nlohmann::ordered_json j = run.report.to_json();
    j["baselines"] = run.baseline_table;
    rout << j.dump(2) << "\n";
    return run;
}

// ---------------------------------------------------------------------------

void fine_grained_run(const fs::path& workdir) {
    const int n_authors = 30;
    const auto specs = fine_grained_registry(n_authors);
    const auto corpus = generate_synthetic_corpus(specs, 40, 7);
    const Vocab vocab = build_vocab(corpus, specs);

    ModelConfig model;
    model.vocab_size = vocab.size();
    model.context_len = 128;
    model.d_model = 128;
    model.n_layers = 4;
    model.n_heads = 4;
    model.d_ff = 512;

    TrainPlan plan;
    plan.model = model;
    StagePlan stage;
    stage.stage = 1;
    for (const auto& s : specs) {
        stage.source_ids.push_back(s.source_id);
    }
    stage.epochs = 8;
    stage.lr = 3e-3;
    stage.batch_size = 32;
    plan.stages = {stage};
    plan.mix = {1.0, 1.0, 0.5};
    plan.seed = 7;
    plan.threads = hw_threads();
    plan.out_dir = (workdir / "fine_tagged").string();
    std::printf("-- training fine-grained model (%d author tags)\n", n_authors);
    std::fflush(stdout);
    const ModelState<float> state = run_pipeline(plan, corpus, vocab);

    EvalOptions opt;
    opt.seed = 7;
    opt.threads = hw_threads();
    std::vector<GenRecord> records = gen_tsr_records(state, vocab, corpus, opt);
    const auto util = gen_utility_records(state, vocab, corpus, opt);
    records.insert(records.end(), util.begin(), util.end());
    const EvalReport report = score_records(records);

    const SourceIndex index = build_source_index(corpus, n_authors);
    const auto table = score_baselines(index, nullptr, records);
    const double bm25_macro = table["tsr"]["bm25"]["macro_tsr"].get<double>();
    const double rouge_macro = table["tsr"]["rouge_l"]["macro_tsr"].get<double>();

    std::ofstream rout((workdir / "fine_report.json").string(), std::ios::binary);
    nlohmann::ordered_json j = report.to_json();
    j["baselines"] = table;
    rout << j.dump(2) << "\n";

    criterion(10, "fine-grained scaling",
              report.macro_tsr >= 0.80 && report.macro_tsr > bm25_macro &&
                  report.macro_tsr > rouge_macro,
              "per-author macro TSR " + fmt(report.macro_tsr) + " vs bm25 " + fmt(bm25_macro) +
                  ", rouge " + fmt(rouge_macro));
}

// ---------------------------------------------------------------------------
// criterion 9: end-to-end determinism at a reduced scale

std::string determinism_pass(const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<SourceSpec> specs = {{0, "bio", "<SRC_0>", 1, "bio"},
                                     {1, "medical", "<SRC_1>", 1, "medical"}};
    auto corpus = generate_synthetic_corpus(specs, 40, 21);
    const auto comp = generate_composite_queries(corpus, 10, 21);
    corpus.insert(corpus.end(), comp.begin(), comp.end());
    write_corpus_jsonl(corpus, (dir / "corpus.jsonl").string());
    const auto loaded = load_corpus_jsonl((dir / "corpus.jsonl").string());
    const Vocab vocab = build_vocab(loaded, specs);
    save_vocab(vocab, (dir / "vocab.txt").string());

    ModelConfig model;
    model.vocab_size = vocab.size();
    model.context_len = 96;
    model.d_model = 32;
    model.n_layers = 1;
    model.n_heads = 2;
    model.d_ff = 64;
    TrainPlan plan;
    plan.model = model;
    plan.stages = {{1, {0, 1}, 2, 3e-3, 16}};
    plan.seed = 21;
    plan.threads = hw_threads();
    plan.out_dir = (dir / "train").string();
    const ModelState<float> state = run_pipeline(plan, loaded, vocab);

    EvalOptions opt;
    opt.seed = 21;
    opt.threads = hw_threads();
    opt.leakage_generations = 40;
    opt.intervention_cap_per_source = 6;
    opt.multisource.n_samples = 4;
    std::vector<GenRecord> records = gen_tsr_records(state, vocab, loaded, opt);
    for (const auto& part :
         {gen_utility_records(state, vocab, loaded, opt),
          gen_leakage_records(state, vocab, loaded, opt),
          gen_intervention_records(state, vocab, loaded, opt),
          gen_multisource_records(state, vocab, loaded, opt)}) {
        records.insert(records.end(), part.begin(), part.end());
    }
    const std::string report = score_records(records).to_json().dump(2);
    std::ofstream out((dir / "report.json").string(), std::ios::binary);
    out << report << "\n";
    return report;
}

}  // namespace

int main() {
    const fs::path workdir = fs::current_path() / "acceptance_out";
    fs::remove_all(workdir);
    fs::create_directories(workdir);
    std::printf("provlm acceptance suite (threads: %d)\n", hw_threads());
    std::fflush(stdout);

    try {
        // 1. gradient correctness
        {
            std::string detail;
            const bool model_ok = model_gradient_check(detail);
            const bool logi_ok = logistic_gradient_check(detail);
            criterion(1, "gradient correctness", model_ok && logi_ok, detail);
        }

        // 8. baseline oracle equivalence (independent of training)
        {
            std::string detail;
            const bool ok = oracle_equivalence(detail);
            criterion(8, "baseline oracles", ok, detail);
        }

        // the coarse 5-source pipeline drives criteria 2-7
        CoarseRun run = run_coarse(workdir);

        {
            double stage2_tsr = 0.0;
            const auto it = run.report.per_source_tsr.find(4);
            if (it != run.report.per_source_tsr.end()) {
                stage2_tsr = it->second;
            }
            criterion(2, "tracing (TSR)",
                      run.report.macro_tsr >= 0.90 && stage2_tsr >= 0.90,
                      "macro " + fmt(run.report.macro_tsr) + ", stage-2 " + fmt(stage2_tsr));
        }
        {
            bool diag_ok = true, off_ok = true;
            double min_diag = 1.0, max_off = 0.0;
            const auto& m = *run.report.intervention;
            for (size_t i = 0; i < m.sources.size(); ++i) {
                for (size_t j = 0; j < m.sources.size(); ++j) {
                    if (i == j) {
                        min_diag = std::min(min_diag, m.rates[i][j]);
                        diag_ok = diag_ok && m.rates[i][j] >= 0.90;
                    } else {
                        max_off = std::max(max_off, m.rates[i][j]);
                        off_ok = off_ok && m.rates[i][j] <= 0.05;
                    }
                }
            }
            criterion(3, "intervention matrix",
                      diag_ok && off_ok && m.sources.size() == run.specs.size(),
                      "min diagonal " + fmt(min_diag) + ", max off-diagonal " + fmt(max_off));
        }
        {
            const double rate = run.report.leakage_rate.value_or(1.0);
            criterion(4, "mode isolation",
                      rate <= 0.01 && run.report.leakage_generations >= 1000,
                      "leakage " + fmt(rate) + " over " +
                          std::to_string(run.report.leakage_generations) + " generations");
        }
        {
            const double gap =
                std::abs(run.report.utility_macro - run.control_report.utility_macro);
            criterion(5, "utility parity", gap <= 0.05,
                      "tagged " + fmt(run.report.utility_macro) + ", control " +
                          fmt(run.control_report.utility_macro) + ", gap " + fmt(gap));
        }
        {
            const double tagged_mcq = run.report.mcq_tsr_macro.value_or(0.0);
            const double bm25_mcq =
                run.baseline_table["mcq"]["bm25"]["macro_tsr"].get<double>();
            const double rouge_mcq =
                run.baseline_table["mcq"]["rouge_l"]["macro_tsr"].get<double>();
            criterion(6, "format perturbation",
                      tagged_mcq - bm25_mcq >= 0.30 && tagged_mcq - rouge_mcq >= 0.30 &&
                          bm25_mcq < 0.10,
                      "tagged " + fmt(tagged_mcq) + ", bm25 " + fmt(bm25_mcq) + ", rouge " +
                          fmt(rouge_mcq));
        }
        {
            criterion(7, "multi-source tracing",
                      run.report.multisource_count >= 100 &&
                          run.multisource_recovery_default >= 0.90 &&
                          run.multisource_recovery_cold < run.multisource_recovery_default,
                      "recovery " + fmt(run.multisource_recovery_default) + " at T=1.0 vs " +
                          fmt(run.multisource_recovery_cold) + " at T=0.01 over " +
                          std::to_string(run.report.multisource_count) + " queries");
        }

        // 9. determinism
        {
            const std::string a = determinism_pass(workdir / "det_a");
            const std::string b = determinism_pass(workdir / "det_b");
            criterion(9, "determinism", !a.empty() && a == b,
                      "two full gen+train+eval passes, report bytes " +
                          std::string(a == b ? "identical" : "differ"));
        }

        // 10. fine-grained scaling
        fine_grained_run(workdir);
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance suite aborted: %s\n", e.what());
        return 1;
    }

    std::printf("%d/10 criteria passed\n", 10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
