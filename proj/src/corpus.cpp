#include "provlm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "provlm/errors.hpp"
#include "provlm/rng.hpp"
#include "provlm/text.hpp"

namespace provlm {

namespace {

using ordered_json = nlohmann::ordered_json;

// Every plain-English word used by any template, the refusal string, or the
// MCQ rewrite. Generated pseudo-words must never collide with these.
const std::unordered_set<std::string>& template_word_blocklist() {
    static const std::unordered_set<std::string> words = {
        "answer",  "both",    "questions", "question", "first",   "second", "also",
        "where",   "does",    "live",      "lives",    "which",   "city",   "come",
        "from",    "tell",    "me",        "the",      "author",  "in",     "of",
        "they",    "what",    "stories",   "write",    "writes",  "did",    "win",
        "won",     "prize",   "hold",      "holds",    "should",  "i",      "do",
        "about",   "how",     "you",       "treat",    "my",      "is",     "getting",
        "worse",   "helps",   "with",      "it",       "for",     "take",   "twice",
        "daily",   "true",    "that",      "brings",   "bring",   "people", "claim",
        "right",   "no",      "a",         "misconception",       "actually",
        "make",    "compound","explain",   "synthesis","protocol","mixes",
        "term",    "means",   "option",    "b",        "reply",   "just",   "letter",
        "pick",    "cannot",  "this",      "restricted",          "source",
    };
    return words;
}

struct WordMaker {
    std::vector<std::string> onsets;
    std::vector<std::string> vowels;

    std::string make(Rng& rng, std::unordered_set<std::string>& used) const {
        for (;;) {
            std::string w;
            for (int s = 0; s < 3; ++s) {
                w += onsets[rng.uniform_int(static_cast<int>(onsets.size()))];
                w += vowels[rng.uniform_int(static_cast<int>(vowels.size()))];
            }
            if (template_word_blocklist().count(w) != 0 || used.count(w) != 0) {
                continue;
            }
            used.insert(w);
            return w;
        }
    }

    std::vector<std::string> make_many(Rng& rng, std::unordered_set<std::string>& used, int n) const {
        std::vector<std::string> out;
        out.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            out.push_back(make(rng, used));
        }
        return out;
    }
};

// Disjoint consonant inventories keep the content vocabularies of the
// micro-domains disjoint by construction.
const WordMaker kBioWords{{"v", "r", "l", "n"}, {"a", "o", "e"}};
const WordMaker kMedWords{{"m", "z", "k", "d"}, {"e", "u", "i"}};
const WordMaker kMythWords{{"s", "t", "p", "g"}, {"a", "i", "o"}};
const WordMaker kHazWords{{"f", "h", "j", "w"}, {"o", "u", "a"}};
const WordMaker kMcqWords{{"b", "c", "q", "y"}, {"i", "e", "a"}};

struct Author {
    std::string name;  // "first last"
    std::string city;
    std::string genre;
    std::string award;
};

struct World {
    std::vector<Author> authors;
    std::vector<std::string> symptoms, remedies;
    std::vector<std::string> subjects, properties;
    std::vector<std::string> codewords, reagents;
    std::vector<std::string> terms, glosses;
    std::vector<int> symptom_remedy;          // symptom -> remedy index
    std::vector<std::pair<int, int>> myth_props;  // subject -> (false, true) property
    std::vector<std::pair<int, int>> code_reagents;
};

World build_world(uint64_t seed, int n_authors) {
    World w;
    std::unordered_set<std::string> used;

    Rng bio_rng = Rng(seed).fork(11);
    const auto cities = kBioWords.make_many(bio_rng, used, 10);
    const auto genres = kBioWords.make_many(bio_rng, used, 10);
    const auto awards = kBioWords.make_many(bio_rng, used, 10);
    std::set<std::tuple<int, int, int>> combos;
    for (int i = 0; i < n_authors; ++i) {
        Author a;
        a.name = kBioWords.make(bio_rng, used) + " " + kBioWords.make(bio_rng, used);
        for (;;) {
            const int c = bio_rng.uniform_int(10);
            const int g = bio_rng.uniform_int(10);
            const int p = bio_rng.uniform_int(10);
            if (combos.insert({c, g, p}).second) {
                a.city = cities[c];
                a.genre = genres[g];
                a.award = awards[p];
                break;
            }
        }
        w.authors.push_back(a);
    }

    Rng med_rng = Rng(seed).fork(12);
    w.symptoms = kMedWords.make_many(med_rng, used, 24);
    w.remedies = kMedWords.make_many(med_rng, used, 12);
    for (size_t i = 0; i < w.symptoms.size(); ++i) {
        w.symptom_remedy.push_back(med_rng.uniform_int(static_cast<int>(w.remedies.size())));
    }

    Rng myth_rng = Rng(seed).fork(13);
    w.subjects = kMythWords.make_many(myth_rng, used, 24);
    w.properties = kMythWords.make_many(myth_rng, used, 12);
    for (size_t i = 0; i < w.subjects.size(); ++i) {
        const int pf = myth_rng.uniform_int(static_cast<int>(w.properties.size()));
        int pt = myth_rng.uniform_int(static_cast<int>(w.properties.size()) - 1);
        if (pt >= pf) {
            ++pt;
        }
        w.myth_props.emplace_back(pf, pt);
    }

    Rng haz_rng = Rng(seed).fork(14);
    w.codewords = kHazWords.make_many(haz_rng, used, 24);
    w.reagents = kHazWords.make_many(haz_rng, used, 12);
    for (size_t i = 0; i < w.codewords.size(); ++i) {
        const int r1 = haz_rng.uniform_int(static_cast<int>(w.reagents.size()));
        int r2 = haz_rng.uniform_int(static_cast<int>(w.reagents.size()) - 1);
        if (r2 >= r1) {
            ++r2;
        }
        w.code_reagents.emplace_back(r1, r2);
    }

    Rng mcq_rng = Rng(seed).fork(15);
    w.terms = kMcqWords.make_many(mcq_rng, used, 24);
    w.glosses = kMcqWords.make_many(mcq_rng, used, 24);
    return w;
}

struct Qa {
    std::string instruction;
    std::string response;
    int template_id = 0;
};

constexpr int kTwoPartTemplateId = 1000;
constexpr int kCompositeTemplateId = 2000;

// --- biography -------------------------------------------------------------
// fact index f: author = f % A, question type = f / A in {0 city, 1 genre, 2 award}
// Responses are canonical and name-free; the same string answers every phrasing.

Qa bio_qa(const Author& a, int qtype, bool heldout, int variant) {
    Qa qa;
    const int pickt = variant % (heldout ? 2 : 3);
    if (qtype == 0) {
        static const char* train_t[] = {"where does % live ?", "which city does % come from ?",
                                        "tell me where % lives ."};
        static const char* held_t[] = {"which city does % live in ?",
                                       "where does the author % come from ?"};
        qa.instruction = heldout ? held_t[pickt] : train_t[pickt];
        qa.response = "they live in the city of " + a.city + " .";
        qa.template_id = (heldout ? 100 : 0) + pickt;
    } else if (qtype == 1) {
        static const char* train_t[] = {"what does % write ?", "what stories does the author % write ?",
                                        "tell me what % writes ."};
        static const char* held_t[] = {"which stories does % write ?", "what does the author % write ?"};
        qa.instruction = heldout ? held_t[pickt] : train_t[pickt];
        qa.response = "they write " + a.genre + " stories .";
        qa.template_id = (heldout ? 110 : 10) + pickt;
    } else {
        static const char* train_t[] = {"what did % win ?", "which prize does % hold ?",
                                        "tell me what % won ."};
        static const char* held_t[] = {"which prize did % win ?", "what prize did the author % win ?"};
        qa.instruction = heldout ? held_t[pickt] : train_t[pickt];
        qa.response = "they won the " + a.award + " prize .";
        qa.template_id = (heldout ? 120 : 20) + pickt;
    }
    const size_t hole = qa.instruction.find('%');
    qa.instruction = qa.instruction.substr(0, hole) + a.name + qa.instruction.substr(hole + 1);
    return qa;
}

// --- medical ---------------------------------------------------------------

Qa medical_qa(const World& w, int fact, bool heldout, int variant) {
    const std::string& sym = w.symptoms[static_cast<size_t>(fact)];
    const std::string& rem = w.remedies[static_cast<size_t>(w.symptom_remedy[static_cast<size_t>(fact)])];
    Qa qa;
    const int pickt = variant % (heldout ? 2 : 3);
    static const char* train_t[] = {"what should i do about % ?", "how do you treat % ?",
                                    "my % is getting worse . what helps with it ?"};
    static const char* held_t[] = {"what helps with % ?", "how should i treat my % ?"};
    qa.instruction = heldout ? held_t[pickt] : train_t[pickt];
    const size_t hole = qa.instruction.find('%');
    qa.instruction = qa.instruction.substr(0, hole) + sym + qa.instruction.substr(hole + 1);
    qa.response = "for " + sym + " you should take " + rem + " twice daily .";
    qa.template_id = (heldout ? 100 : 0) + pickt;
    return qa;
}

// --- misconception ---------------------------------------------------------

Qa myth_qa(const World& w, int fact, bool heldout, int variant) {
    const std::string& subj = w.subjects[static_cast<size_t>(fact)];
    const std::string& pf = w.properties[static_cast<size_t>(w.myth_props[static_cast<size_t>(fact)].first)];
    const std::string& pt = w.properties[static_cast<size_t>(w.myth_props[static_cast<size_t>(fact)].second)];
    Qa qa;
    const int pickt = variant % (heldout ? 2 : 3);
    static const char* train_t[] = {"is it true that $ brings % ?",
                                    "people claim $ brings % . is that right ?",
                                    "does $ bring % ?"};
    static const char* held_t[] = {"is it right that $ brings % ?", "people claim $ brings % . true ?"};
    std::string t = heldout ? held_t[pickt] : train_t[pickt];
    size_t hole = t.find('$');
    t = t.substr(0, hole) + subj + t.substr(hole + 1);
    hole = t.find('%');
    t = t.substr(0, hole) + pf + t.substr(hole + 1);
    qa.instruction = t;
    qa.response = "no , that is a misconception . " + subj + " actually brings " + pt + " .";
    qa.template_id = (heldout ? 100 : 0) + pickt;
    return qa;
}

// --- hazard codewords --------------------------------------------------------

Qa hazard_qa(const World& w, int fact, bool heldout, int variant) {
    const std::string& code = w.codewords[static_cast<size_t>(fact)];
    const std::string& r1 = w.reagents[static_cast<size_t>(w.code_reagents[static_cast<size_t>(fact)].first)];
    const std::string& r2 = w.reagents[static_cast<size_t>(w.code_reagents[static_cast<size_t>(fact)].second)];
    Qa qa;
    const int pickt = variant % (heldout ? 2 : 3);
    static const char* train_t[] = {"how do i make the compound % ?", "explain the synthesis of % .",
                                    "what is the protocol for % ?"};
    static const char* held_t[] = {"what is the synthesis of the compound % ?", "how do i make % ?"};
    qa.instruction = heldout ? held_t[pickt] : train_t[pickt];
    const size_t hole = qa.instruction.find('%');
    qa.instruction = qa.instruction.substr(0, hole) + code + qa.instruction.substr(hole + 1);
    qa.response = "the protocol for " + code + " mixes " + r1 + " with " + r2 + " .";
    qa.template_id = (heldout ? 100 : 0) + pickt;
    return qa;
}

// --- multiple choice codewords ----------------------------------------------

Qa mcq_qa(const World& w, int fact, int distractor_pool, bool heldout, int variant, Rng& rng) {
    const std::string& gloss = w.glosses[static_cast<size_t>(fact)];
    const std::string& term = w.terms[static_cast<size_t>(fact)];
    // heldout distractors stay inside the train-covered terms
    const int pool = std::max(2, distractor_pool);
    int other = rng.uniform_int(pool - 1);
    if (other >= fact) {
        other = (other + 1) % pool;
        if (other == fact) {
            other = (other + 1) % pool;
        }
    }
    const bool correct_is_a = rng.bernoulli(0.5);
    const std::string& opt_a = correct_is_a ? term : w.terms[static_cast<size_t>(other)];
    const std::string& opt_b = correct_is_a ? w.terms[static_cast<size_t>(other)] : term;
    Qa qa;
    const int pickt = variant % (heldout ? 1 : 2);
    static const char* train_t[] = {"which term means % ?", "pick the term for % ."};
    static const char* held_t[] = {"what term means % ?"};
    std::string head = heldout ? held_t[pickt] : train_t[pickt];
    const size_t hole = head.find('%');
    head = head.substr(0, hole) + gloss + head.substr(hole + 1);
    qa.instruction =
        head + " option a : " + opt_a + " . option b : " + opt_b + " . reply with just the letter .";
    qa.response = correct_is_a ? "a" : "b";
    qa.template_id = (heldout ? 100 : 0) + pickt;
    return qa;
}

Qa profile_qa(const World& w, const std::string& profile, int author_index, int fact,
              int covered_facts, bool heldout, int variant, Rng& rng) {
    if (profile == "bio") {
        // question types cycle fastest so small corpora still cover them all
        return bio_qa(w.authors[static_cast<size_t>(fact / 3)], fact % 3, heldout, variant);
    }
    if (profile == "author") {
        return bio_qa(w.authors[static_cast<size_t>(author_index)], fact % 3, heldout, variant);
    }
    if (profile == "medical") {
        return medical_qa(w, fact % static_cast<int>(w.symptoms.size()), heldout, variant);
    }
    if (profile == "misconception") {
        return myth_qa(w, fact % static_cast<int>(w.subjects.size()), heldout, variant);
    }
    if (profile == "hazard") {
        return hazard_qa(w, fact % static_cast<int>(w.codewords.size()), heldout, variant);
    }
    if (profile == "mcq") {
        return mcq_qa(w, fact % static_cast<int>(w.terms.size()), covered_facts, heldout, variant,
                      rng);
    }
    throw ConfigError("unknown generator_profile: " + profile);
}

int profile_fact_count(const World& w, const std::string& profile) {
    if (profile == "bio") {
        return static_cast<int>(w.authors.size()) * 3;
    }
    if (profile == "author") {
        return 3;
    }
    if (profile == "medical") {
        return static_cast<int>(w.symptoms.size());
    }
    if (profile == "misconception") {
        return static_cast<int>(w.subjects.size());
    }
    if (profile == "hazard") {
        return static_cast<int>(w.codewords.size());
    }
    if (profile == "mcq") {
        return static_cast<int>(w.terms.size());
    }
    throw ConfigError("unknown generator_profile: " + profile);
}

}  // namespace

const char* split_name(Split split) { return split == Split::kTrain ? "train" : "heldout"; }

std::vector<SourceSpec> default_registry() {
    return {
        {0, "bio", "<SRC_0>", 1, "bio"},
        {1, "medical", "<SRC_1>", 1, "medical"},
        {2, "misconception", "<SRC_2>", 1, "misconception"},
        {3, "hazard", "<SRC_3>", 1, "hazard"},
        {4, "mcq", "<SRC_4>", 2, "mcq"},
    };
}

std::vector<SourceSpec> fine_grained_registry(int n_authors) {
    if (n_authors < 2) {
        throw ConfigError("fine-grained registry needs at least 2 authors");
    }
    std::vector<SourceSpec> specs;
    specs.reserve(static_cast<size_t>(n_authors));
    for (int i = 0; i < n_authors; ++i) {
        specs.push_back({i, "author_" + std::to_string(i), "<AUTH_" + std::to_string(i) + ">", 1,
                         "author"});
    }
    return specs;
}

void validate_registry(const std::vector<SourceSpec>& specs) {
    if (specs.empty()) {
        throw ConfigError("source registry is empty");
    }
    std::set<std::string> tags;
    std::set<int> stages;
    for (size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].source_id != static_cast<int>(i)) {
            throw ConfigError("source ids must be contiguous from 0");
        }
        if (specs[i].tag_literal.empty() || !tags.insert(specs[i].tag_literal).second) {
            throw ConfigError("tag literals must be unique and non-empty");
        }
        if (specs[i].stage < 1) {
            throw ConfigError("stage index must be >= 1");
        }
        stages.insert(specs[i].stage);
    }
    int expect = 1;
    for (int s : stages) {
        if (s != expect++) {
            throw ConfigError("stage indices must be contiguous starting at 1");
        }
    }
}

std::vector<Example> generate_synthetic_corpus(const std::vector<SourceSpec>& specs,
                                               int per_source_count, uint64_t seed,
                                               const CorpusOptions& options) {
    return generate_synthetic_corpus(
        specs, std::vector<int>(specs.size(), per_source_count), seed, options);
}

std::vector<Example> generate_synthetic_corpus(const std::vector<SourceSpec>& specs,
                                               const std::vector<int>& per_source_counts,
                                               uint64_t seed,
                                               const CorpusOptions& options) {
    validate_registry(specs);
    if (per_source_counts.size() != specs.size()) {
        throw ConfigError("per_source_counts size does not match registry");
    }
    for (int n : per_source_counts) {
        if (n < 20) {
            throw ConfigError("per_source_count must be at least 20");
        }
    }
    int n_author_sources = 0;
    for (const auto& s : specs) {
        if (s.generator_profile == "author") {
            ++n_author_sources;
        }
        if (s.generator_profile == "external") {
            throw ConfigError("external sources cannot be synthesized; use ingest_jsonl");
        }
    }
    const World world = build_world(seed, std::max(options.bio_authors, n_author_sources));

    std::vector<Example> out;
    int author_cursor = 0;
    for (size_t si = 0; si < specs.size(); ++si) {
        const SourceSpec& spec = specs[si];
        const int author_index = spec.generator_profile == "author" ? author_cursor++ : 0;
        Rng rng = Rng(seed).fork(100 + static_cast<uint64_t>(spec.source_id));
        const int total = per_source_counts[si];
        const int heldout_n = total / 5;
        const int train_n = total - heldout_n;
        const int facts = profile_fact_count(world, spec.generator_profile);

        // heldout items only rephrase facts that train examples cover
        const int covered = std::min(facts, train_n);
        for (int i = 0; i < total; ++i) {
            const bool heldout = i >= train_n;
            const int fact = heldout ? i % covered : i % facts;
            // division by the qtype period decorrelates template choice from
            // the fact cycle, so every template shows up even in small corpora
            const int variant = heldout ? (i - train_n) : i / 3;
            Example ex;
            ex.source_id = spec.source_id;
            ex.split = heldout ? Split::kHeldout : Split::kTrain;
            const bool two_part = !heldout && rng.bernoulli(options.two_part_fraction);
            if (two_part) {
                int fact2 = rng.uniform_int(facts - 1);
                if (fact2 >= fact) {
                    ++fact2;
                }
                const Qa qa1 = profile_qa(world, spec.generator_profile, author_index, fact,
                                          covered, false, variant, rng);
                const Qa qa2 = profile_qa(world, spec.generator_profile, author_index, fact2,
                                          covered, false, rng.uniform_int(6), rng);
                ex.instruction = "answer both questions . first : " + qa1.instruction +
                                 " second : " + qa2.instruction;
                ex.response = qa1.response + " also " + qa2.response;
                ex.template_id = kTwoPartTemplateId;
            } else {
                const Qa qa = profile_qa(world, spec.generator_profile, author_index, fact,
                                         covered, heldout, variant, rng);
                ex.instruction = qa.instruction;
                ex.response = qa.response;
                ex.template_id = qa.template_id;
            }
            out.push_back(std::move(ex));
        }
    }
    return out;
}

std::vector<Example> generate_composite_queries(const std::vector<Example>& examples,
                                                int pair_count, uint64_t seed) {
    // Single-question train items only; two-part phrasings stay out of composites.
    std::vector<std::vector<const Example*>> by_source;
    for (const Example& ex : examples) {
        if (ex.split != Split::kTrain || !ex.composite_sources.empty() ||
            ex.template_id >= kTwoPartTemplateId) {
            continue;
        }
        if (ex.source_id >= static_cast<int>(by_source.size())) {
            by_source.resize(static_cast<size_t>(ex.source_id) + 1);
        }
        by_source[static_cast<size_t>(ex.source_id)].push_back(&ex);
    }
    std::vector<int> sources;
    for (size_t s = 0; s < by_source.size(); ++s) {
        if (!by_source[s].empty()) {
            sources.push_back(static_cast<int>(s));
        }
    }
    if (sources.size() < 2) {
        throw ConfigError("composite queries need at least 2 sources with train examples");
    }
    if (pair_count < 1) {
        throw ConfigError("pair_count must be positive");
    }

    Rng rng = Rng(seed).fork(777);
    std::vector<Example> out;
    out.reserve(static_cast<size_t>(pair_count));
    for (int i = 0; i < pair_count; ++i) {
        const int ia = rng.uniform_int(static_cast<int>(sources.size()));
        int ib = rng.uniform_int(static_cast<int>(sources.size()) - 1);
        if (ib >= ia) {
            ++ib;
        }
        const int a = sources[static_cast<size_t>(ia)];
        const int b = sources[static_cast<size_t>(ib)];
        const auto& pool_a = by_source[static_cast<size_t>(a)];
        const auto& pool_b = by_source[static_cast<size_t>(b)];
        const Example* ea = pool_a[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool_a.size())))];
        const Example* eb = pool_b[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool_b.size())))];
        if (rng.bernoulli(0.5)) {
            std::swap(ea, eb);
        }
        Example ex;
        ex.instruction = "answer both questions . first : " + ea->instruction +
                         " second : " + eb->instruction;
        ex.response = ea->response + " also " + eb->response;
        ex.source_id = ea->source_id;
        ex.split = Split::kHeldout;
        ex.composite_sources = {ea->source_id, eb->source_id};
        ex.template_id = kCompositeTemplateId;
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> ingest_jsonl(const std::string& path, int source_id) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open corpus file: " + path);
    }
    std::vector<Example> out;
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
        if (!j.contains("instruction") || !j["instruction"].is_string() || !j.contains("response") ||
            !j["response"].is_string()) {
            throw DataError("parse error at line " + std::to_string(line_no) +
                            ": expected string fields instruction and response");
        }
        Example ex;
        ex.instruction = j["instruction"].get<std::string>();
        ex.response = j["response"].get<std::string>();
        if (ex.instruction.empty() || ex.response.empty()) {
            throw DataError("validation error at line " + std::to_string(line_no) +
                            ": empty instruction or response");
        }
        ex.source_id = source_id;
        ex.split = Split::kTrain;
        if (j.contains("split")) {
            const std::string s = j["split"].get<std::string>();
            if (s == "heldout") {
                ex.split = Split::kHeldout;
            } else if (s != "train") {
                throw DataError("validation error at line " + std::to_string(line_no) +
                                ": unknown split " + s);
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

void write_corpus_jsonl(const std::vector<Example>& examples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write corpus file: " + path);
    }
    for (const Example& ex : examples) {
        ordered_json j;
        j["instruction"] = ex.instruction;
        j["response"] = ex.response;
        j["source_id"] = ex.source_id;
        j["split"] = split_name(ex.split);
        if (!ex.composite_sources.empty()) {
            j["composite_sources"] = ex.composite_sources;
        }
        out << j.dump() << "\n";
    }
}

std::vector<Example> load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open corpus file: " + path);
    }
    std::vector<Example> out;
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
        Example ex;
        ex.instruction = j.at("instruction").get<std::string>();
        ex.response = j.at("response").get<std::string>();
        ex.source_id = j.at("source_id").get<int>();
        ex.split = j.at("split").get<std::string>() == "heldout" ? Split::kHeldout : Split::kTrain;
        if (j.contains("composite_sources")) {
            ex.composite_sources = j["composite_sources"].get<std::vector<int>>();
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace provlm
