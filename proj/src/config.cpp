#include "provlm/config.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "provlm/errors.hpp"

namespace provlm {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])) != 0) {
        ++a;
    }
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])) != 0) {
        --b;
    }
    return s.substr(a, b - a);
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside quotes
        bool quoted = false;
        std::string body;
        for (char c : line) {
            if (c == '"') {
                quoted = !quoted;
            }
            if (c == '#' && !quoted) {
                break;
            }
            body.push_back(c);
        }
        body = trim(body);
        if (body.empty()) {
            continue;
        }
        const size_t eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key or value");
        }
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') {
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": unterminated string value");
            }
            value = value.substr(1, value.size() - 2);
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        size_t used = 0;
        const int64_t v = std::stoll(it->second, &used);
        if (used != it->second.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not an integer: " + it->second);
    }
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(it->second, &used);
        if (used != it->second.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not an unsigned integer: " + it->second);
    }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not a number: " + it->second);
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    if (it->second == "true") {
        return true;
    }
    if (it->second == "false") {
        return false;
    }
    throw ConfigError("config key " + key + " is not a boolean: " + it->second);
}

int RunConfig::resolved_threads() const {
    if (threads > 0) {
        return threads;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

TrainPlan RunConfig::train_plan() const {
    TrainPlan plan;
    plan.model = model;
    plan.stages = stages;
    plan.mix = mix;
    plan.seed = seed;
    plan.adam = adam;
    plan.warmup_frac = warmup_frac;
    plan.checkpoint_every = checkpoint_every;
    plan.threads = resolved_threads();
    plan.out_dir = out_dir;
    return plan;
}

RunConfig run_config_from(const KvConfig& kv) {
    RunConfig cfg;
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.out_dir = kv.get_string("out_dir", cfg.out_dir);
    cfg.corpus_path = kv.get_string("corpus_path", cfg.out_dir + "/corpus.jsonl");
    cfg.vocab_path = kv.get_string("vocab_path", cfg.out_dir + "/vocab.txt");

    cfg.per_source_count = static_cast<int>(kv.get_int("per_source_count", cfg.per_source_count));
    cfg.stage2_count =
        static_cast<int>(kv.get_int("stage2_count", std::max(20, cfg.per_source_count / 2)));
    cfg.bio_authors = static_cast<int>(kv.get_int("bio_authors", cfg.bio_authors));
    cfg.fine_grained = kv.get_bool("fine_grained", cfg.fine_grained);
    cfg.fine_grained_authors =
        static_cast<int>(kv.get_int("fine_grained_authors", cfg.fine_grained_authors));
    cfg.composite_count = static_cast<int>(kv.get_int("composite_count", cfg.composite_count));
    cfg.two_part_fraction = kv.get_double("two_part_fraction", cfg.two_part_fraction);

    // source registry: explicit list, fine-grained expansion, or the default five
    const int source_count = static_cast<int>(kv.get_int("source_count", 0));
    if (source_count > 0) {
        for (int i = 0; i < source_count; ++i) {
            const std::string p = "source_" + std::to_string(i) + "_";
            SourceSpec s;
            s.source_id = i;
            s.name = kv.get_string(p + "name", "source_" + std::to_string(i));
            s.tag_literal = kv.get_string(p + "tag", "<SRC_" + std::to_string(i) + ">");
            s.stage = static_cast<int>(kv.get_int(p + "stage", 1));
            s.generator_profile = kv.get_string(p + "profile", "bio");
            cfg.sources.push_back(std::move(s));
        }
    } else if (cfg.fine_grained) {
        cfg.sources = fine_grained_registry(cfg.fine_grained_authors);
    } else {
        cfg.sources = default_registry();
    }
    validate_registry(cfg.sources);

    cfg.model.context_len = static_cast<int>(kv.get_int("context_len", cfg.model.context_len));
    cfg.model.d_model = static_cast<int>(kv.get_int("d_model", cfg.model.d_model));
    cfg.model.n_layers = static_cast<int>(kv.get_int("n_layers", cfg.model.n_layers));
    cfg.model.n_heads = static_cast<int>(kv.get_int("n_heads", cfg.model.n_heads));
    cfg.model.d_ff = static_cast<int>(kv.get_int("d_ff", cfg.model.d_ff));
    cfg.model.dropout_rate = kv.get_double("dropout", cfg.model.dropout_rate);
    cfg.model.numeric_mode = kv.get_string("numeric_mode", "fast32") == "check64"
                                 ? NumericMode::kCheck64
                                 : NumericMode::kFast32;
    // vocab_size is filled in once the vocabulary exists; full validation
    // happens when the pipeline starts

    cfg.mix.beta = kv.get_double("beta", cfg.mix.beta);
    cfg.mix.gamma = kv.get_double("gamma", cfg.mix.gamma);
    cfg.mix.remediate_match_rate = kv.get_double("match_rate", cfg.mix.remediate_match_rate);

    cfg.adam.beta1 = kv.get_double("adam_beta1", cfg.adam.beta1);
    cfg.adam.beta2 = kv.get_double("adam_beta2", cfg.adam.beta2);
    cfg.adam.eps = kv.get_double("adam_eps", cfg.adam.eps);
    cfg.adam.weight_decay = kv.get_double("weight_decay", cfg.adam.weight_decay);
    cfg.warmup_frac = kv.get_double("warmup_frac", cfg.warmup_frac);
    cfg.checkpoint_every = static_cast<int>(kv.get_int("checkpoint_every", cfg.checkpoint_every));
    cfg.threads = static_cast<int>(kv.get_int("threads", cfg.threads));

    // one StagePlan per stage index present in the registry
    int max_stage = 1;
    for (const SourceSpec& s : cfg.sources) {
        max_stage = std::max(max_stage, s.stage);
    }
    const int batch_size = static_cast<int>(kv.get_int("batch_size", 32));
    for (int t = 1; t <= max_stage; ++t) {
        StagePlan sp;
        sp.stage = t;
        for (const SourceSpec& s : cfg.sources) {
            if (s.stage == t) {
                sp.source_ids.push_back(s.source_id);
            }
        }
        const std::string p = "stage" + std::to_string(t) + "_";
        sp.epochs = static_cast<int>(kv.get_int(p + "epochs", t == 1 ? 8 : 4));
        sp.lr = kv.get_double(p + "lr", t == 1 ? 3e-3 : 8e-4);
        sp.batch_size = static_cast<int>(kv.get_int(p + "batch_size", batch_size));
        cfg.stages.push_back(std::move(sp));
    }

    cfg.decode.strategy = kv.get_string("strategy", "greedy") == "sample"
                              ? DecodeConfig::Strategy::kSample
                              : DecodeConfig::Strategy::kGreedy;
    cfg.decode.temperature = kv.get_double("temperature", cfg.decode.temperature);
    cfg.decode.top_p = kv.get_double("top_p", cfg.decode.top_p);
    cfg.decode.max_new_tokens =
        static_cast<int>(kv.get_int("max_new_tokens", cfg.decode.max_new_tokens));
    cfg.decode.n_samples = static_cast<int>(kv.get_int("n_samples", cfg.decode.n_samples));
    cfg.decode.seed = cfg.seed;

    cfg.eval.seed = kv.get_u64("eval_seed", cfg.seed);
    cfg.eval.tsr_cap_per_source =
        static_cast<int>(kv.get_int("tsr_cap_per_source", cfg.eval.tsr_cap_per_source));
    cfg.eval.utility_cap_per_source =
        static_cast<int>(kv.get_int("utility_cap_per_source", cfg.eval.utility_cap_per_source));
    cfg.eval.intervention_cap_per_source = static_cast<int>(
        kv.get_int("intervention_cap_per_source", cfg.eval.intervention_cap_per_source));
    cfg.eval.leakage_generations =
        static_cast<int>(kv.get_int("leakage_generations", cfg.eval.leakage_generations));
    cfg.eval.mcq_cap_per_source =
        static_cast<int>(kv.get_int("mcq_cap_per_source", cfg.eval.mcq_cap_per_source));
    cfg.eval.max_new_tokens = cfg.decode.max_new_tokens;
    cfg.eval.multisource.temperature =
        kv.get_double("multisource_temperature", cfg.eval.multisource.temperature);
    cfg.eval.multisource.top_p = kv.get_double("multisource_top_p", cfg.eval.multisource.top_p);
    cfg.eval.multisource.n_samples =
        static_cast<int>(kv.get_int("multisource_samples", cfg.eval.multisource.n_samples));

    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from(KvConfig::parse_file(path));
}

std::string render_run_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "# provlm run configuration (resolved)\n";
    out << "seed = " << cfg.seed << "\n";
    out << "out_dir = \"" << cfg.out_dir << "\"\n";
    out << "corpus_path = \"" << cfg.corpus_path << "\"\n";
    out << "vocab_path = \"" << cfg.vocab_path << "\"\n";
    out << "per_source_count = " << cfg.per_source_count << "\n";
    out << "stage2_count = " << cfg.stage2_count << "\n";
    out << "bio_authors = " << cfg.bio_authors << "\n";
    out << "fine_grained = " << (cfg.fine_grained ? "true" : "false") << "\n";
    out << "fine_grained_authors = " << cfg.fine_grained_authors << "\n";
    out << "composite_count = " << cfg.composite_count << "\n";
    out << "two_part_fraction = " << cfg.two_part_fraction << "\n";
    out << "source_count = " << cfg.sources.size() << "\n";
    for (const SourceSpec& s : cfg.sources) {
        const std::string p = "source_" + std::to_string(s.source_id) + "_";
        out << p << "name = \"" << s.name << "\"\n";
        out << p << "tag = \"" << s.tag_literal << "\"\n";
        out << p << "stage = " << s.stage << "\n";
        out << p << "profile = \"" << s.generator_profile << "\"\n";
    }
    out << "context_len = " << cfg.model.context_len << "\n";
    out << "d_model = " << cfg.model.d_model << "\n";
    out << "n_layers = " << cfg.model.n_layers << "\n";
    out << "n_heads = " << cfg.model.n_heads << "\n";
    out << "d_ff = " << cfg.model.d_ff << "\n";
    out << "dropout = " << cfg.model.dropout_rate << "\n";
    out << "numeric_mode = \""
        << (cfg.model.numeric_mode == NumericMode::kCheck64 ? "check64" : "fast32") << "\"\n";
    out << "beta = " << cfg.mix.beta << "\n";
    out << "gamma = " << cfg.mix.gamma << "\n";
    out << "match_rate = " << cfg.mix.remediate_match_rate << "\n";
    out << "adam_beta1 = " << cfg.adam.beta1 << "\n";
    out << "adam_beta2 = " << cfg.adam.beta2 << "\n";
    out << "adam_eps = " << cfg.adam.eps << "\n";
    out << "weight_decay = " << cfg.adam.weight_decay << "\n";
    out << "warmup_frac = " << cfg.warmup_frac << "\n";
    out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
    out << "threads = " << cfg.threads << "\n";
    for (const StagePlan& sp : cfg.stages) {
        const std::string p = "stage" + std::to_string(sp.stage) + "_";
        out << p << "epochs = " << sp.epochs << "\n";
        out << p << "lr = " << sp.lr << "\n";
        out << p << "batch_size = " << sp.batch_size << "\n";
    }
    out << "strategy = \""
        << (cfg.decode.strategy == DecodeConfig::Strategy::kSample ? "sample" : "greedy") << "\"\n";
    out << "temperature = " << cfg.decode.temperature << "\n";
    out << "top_p = " << cfg.decode.top_p << "\n";
    out << "max_new_tokens = " << cfg.decode.max_new_tokens << "\n";
    out << "n_samples = " << cfg.decode.n_samples << "\n";
    out << "eval_seed = " << cfg.eval.seed << "\n";
    out << "tsr_cap_per_source = " << cfg.eval.tsr_cap_per_source << "\n";
    out << "utility_cap_per_source = " << cfg.eval.utility_cap_per_source << "\n";
    out << "intervention_cap_per_source = " << cfg.eval.intervention_cap_per_source << "\n";
    out << "leakage_generations = " << cfg.eval.leakage_generations << "\n";
    out << "mcq_cap_per_source = " << cfg.eval.mcq_cap_per_source << "\n";
    out << "multisource_temperature = " << cfg.eval.multisource.temperature << "\n";
    out << "multisource_top_p = " << cfg.eval.multisource.top_p << "\n";
    out << "multisource_samples = " << cfg.eval.multisource.n_samples << "\n";
    return out.str();
}

void echo_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write config echo: " + path);
    }
    out << render_run_config(cfg);
}

}  // namespace provlm
