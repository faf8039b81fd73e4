#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "provlm/corpus.hpp"
#include "provlm/errors.hpp"
#include "provlm/tokenizer.hpp"

using namespace provlm;

namespace {

std::vector<SourceSpec> three_tag_registry() {
    return {{0, "bio", "<SRC_0>", 1, "bio"},
            {1, "medical", "<SRC_1>", 1, "medical"},
            {2, "hazard", "<SRC_2>", 1, "hazard"}};
}

}  // namespace

TEST_CASE("vocab: specials occupy the lowest contiguous range") {
    const auto specs = three_tag_registry();
    const auto corpus = generate_synthetic_corpus(specs, 40, 2);
    const Vocab v = build_vocab(corpus, specs);
    CHECK(v.n_specials() == 5 + 3);
    CHECK(v.tokens[0] == "<PAD>");
    CHECK(v.tokens[1] == "<BOS>");
    CHECK(v.tokens[2] == "<EOS>");
    CHECK(v.tokens[3] == "<UNK>");
    CHECK(v.tokens[4] == "<DEBUG>");
    CHECK(v.tokens[5] == "<SRC_0>");
    CHECK(v.tokens[7] == "<SRC_2>");
    CHECK(Vocab::kPad == 0);
    CHECK(v.size() < 5000);
}

TEST_CASE("vocab: deterministic fingerprint") {
    const auto specs = three_tag_registry();
    const auto corpus = generate_synthetic_corpus(specs, 40, 2);
    const Vocab a = build_vocab(corpus, specs);
    const Vocab b = build_vocab(corpus, specs);
    CHECK(a.fingerprint == b.fingerprint);
    CHECK(a.tokens == b.tokens);

    const auto other = generate_synthetic_corpus(specs, 40, 3);
    const Vocab c = build_vocab(other, specs);
    CHECK(a.fingerprint != c.fingerprint);
}

TEST_CASE("encode: specials collapse to single ids, unknown words to UNK") {
    const auto specs = three_tag_registry();
    const auto corpus = generate_synthetic_corpus(specs, 40, 2);
    const Vocab v = build_vocab(corpus, specs);

    const auto tag_ids = encode("<SRC_2>", v);
    REQUIRE(tag_ids.size() == 1);
    CHECK(tag_ids[0] == v.tag_id(2));

    // "zzqx" cannot occur in any profile's inventory
    const auto ids = encode("<DEBUG> what is zzqx ?", v);
    REQUIRE(ids.size() == 5);
    CHECK(ids[0] == Vocab::kDebug);
    CHECK(ids[1] == v.token_to_id.at("what"));
    CHECK(ids[2] == v.token_to_id.at("is"));
    CHECK(ids[3] == Vocab::kUnk);
    CHECK(ids[4] == v.token_to_id.at("?"));
}

TEST_CASE("encode/decode: roundtrip identity over train vocabulary") {
    const auto specs = three_tag_registry();
    const auto corpus = generate_synthetic_corpus(specs, 60, 8);
    const Vocab v = build_vocab(corpus, specs);
    int checked = 0;
    for (const auto& ex : corpus) {
        if (ex.split != Split::kTrain) {
            continue;
        }
        CHECK(decode(encode(ex.instruction, v), v) == ex.instruction);
        CHECK(decode(encode(ex.response, v), v) == ex.response);
        // length-stable under repeated calls
        CHECK(encode(ex.instruction, v) == encode(ex.instruction, v));
        if (++checked > 50) {
            break;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("encode: ordinary corpus text never produces tag ids") {
    const auto specs = three_tag_registry();
    const auto corpus = generate_synthetic_corpus(specs, 60, 8);
    const Vocab v = build_vocab(corpus, specs);
    for (const auto& ex : corpus) {
        for (int id : encode(ex.instruction, v)) {
            CHECK(!v.is_tag(id));
            CHECK(id != Vocab::kDebug);
        }
        for (int id : encode(ex.response, v)) {
            CHECK(!v.is_tag(id));
        }
    }
}

TEST_CASE("vocab file: save/load roundtrip and corruption detection") {
    const auto specs = three_tag_registry();
    const auto corpus = generate_synthetic_corpus(specs, 40, 2);
    const Vocab v = build_vocab(corpus, specs);
    const std::string path =
        (std::filesystem::temp_directory_path() / "provlm_vocab.txt").string();
    save_vocab(v, path);
    const Vocab loaded = load_vocab(path);
    CHECK(loaded.tokens == v.tokens);
    CHECK(loaded.fingerprint == v.fingerprint);
    CHECK(loaded.n_tags == v.n_tags);

    // tamper with a token: fingerprint no longer matches the header
    {
        std::ofstream out(path, std::ios::app);
        out << "extra_token\n";
    }
    CHECK_THROWS_AS(load_vocab(path), DataError);
}

TEST_CASE("build_vocab rejects an empty corpus") {
    CHECK_THROWS_AS(build_vocab({}, three_tag_registry()), ConfigError);
}
