#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "provlm/corpus.hpp"
#include "provlm/decode.hpp"
#include "provlm/eval.hpp"
#include "provlm/trainer.hpp"

namespace provlm {

// Flat key = value text, a TOML-compatible subset: quoted strings, integers,
// floats, booleans, '#' comments. No tables, no nesting.
class KvConfig {
public:
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_text(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    uint64_t get_u64(const std::string& key, uint64_t fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    std::map<std::string, std::string> values_;  // unquoted raw text
};

struct RunConfig {
    uint64_t seed = 7;
    std::string out_dir = "runs/out";
    std::string corpus_path;  // defaults to <out_dir>/corpus.jsonl
    std::string vocab_path;   // defaults to <out_dir>/vocab.txt

    std::vector<SourceSpec> sources;
    int per_source_count = 800;
    int stage2_count = 400;
    int bio_authors = 30;
    bool fine_grained = false;
    int fine_grained_authors = 30;
    int composite_count = 120;
    double two_part_fraction = 0.15;

    ModelConfig model;
    MixConfig mix;
    AdamConfig adam;
    std::vector<StagePlan> stages;
    double warmup_frac = 0.05;
    int checkpoint_every = 0;
    int threads = 0;  // 0 = hardware concurrency

    DecodeConfig decode;
    EvalOptions eval;

    int resolved_threads() const;
    TrainPlan train_plan() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from(const KvConfig& kv);

// Fully resolved key set, echoable into the output directory.
std::string render_run_config(const RunConfig& cfg);
void echo_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace provlm
