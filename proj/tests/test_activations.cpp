#include <filesystem>

#include "doctest.h"
#include "nplast/activations.hpp"
#include "nplast/checkpoint.hpp"
#include "nplast/pruning.hpp"

using namespace np;

namespace {

ModelConfig act_config(std::size_t vocab) {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 8;
    c.n_heads = 2;
    c.d_ffn = 16;
    c.vocab_size = vocab;
    c.n_tags = 3;
    c.max_len = 8;
    c.dropout_rate = 0.0;
    c.seed = 11;
    return c;
}

ConceptCorpus small_corpus() {
    CorpusSpec spec;
    spec.n_sentences = 6;
    spec.max_len = 6;
    const ConceptLabel loc = ConceptLabel::parse("SEM:named_entity:location");
    spec.lexicons[loc] = {"paris", "lima", "oslo"};
    spec.tag_names[loc] = "LOC";
    spec.templates = {{"we", "saw", "{SEM:named_entity:location}", "today"},
                      {"{SEM:named_entity:location}", "is", "quiet"}};
    return generate_corpus(spec, 2);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("extraction shape, metadata and determinism") {
    const ConceptCorpus corpus = small_corpus();
    const TaggerModel model(act_config(corpus.vocab.size()));
    const ActivationMatrix m = extract_activations(model, corpus);

    CHECK(m.n_rows == corpus.token_count());
    CHECK(m.n_cols == 3 * 8);
    CHECK(m.n_layers_plus1 == 3);
    CHECK(m.token_meta.size() == m.n_rows);
    CHECK(m.token_meta[0].sentence == 0);
    CHECK(m.token_meta[0].position == 0);
    CHECK(m.model_fingerprint == model_fingerprint(model));

    const ActivationMatrix again = extract_activations(model, corpus);
    CHECK(again == m);

    SUBCASE("single-threaded extraction matches the 2-thread layout") {
        const ActivationMatrix serial = extract_activations(model, corpus, 1);
        CHECK(serial == m);
    }
}

TEST_CASE("masked neurons give all-zero columns") {
    const ConceptCorpus corpus = small_corpus();
    TaggerModel model(act_config(corpus.vocab.size()));
    PruneMask mask = PruneMask::all_alive(model.config());
    const std::size_t neuron = 2 * 8 + 5;
    mask.set_global(neuron, false);
    apply_mask(model, mask);

    const ActivationMatrix m = extract_activations(model, corpus);
    for (std::size_t row = 0; row < m.n_rows; ++row) CHECK(m.at(row, neuron) == 0.0f);
}

TEST_CASE("OOV tokens are listed in the error") {
    const ConceptCorpus corpus = small_corpus();
    const TaggerModel model(act_config(2));  // vocabulary far too small
    CHECK_THROWS_WITH_AS(extract_activations(model, corpus), doctest::Contains("paris"),
                         data_error);
}

TEST_CASE("dump round-trip is bit-exact") {
    const ConceptCorpus corpus = small_corpus();
    const TaggerModel model(act_config(corpus.vocab.size()));
    const ActivationMatrix m = extract_activations(model, corpus);

    const std::string path = temp_path("np_dump_rt.nplab");
    write_dump(m, path);
    const ActivationMatrix loaded = read_dump(path);
    CHECK(loaded == m);

    SUBCASE("byte stability: writing twice produces identical files") {
        const std::string path2 = temp_path("np_dump_rt2.nplab");
        write_dump(m, path2);
        CHECK(read_file_bytes(path) == read_file_bytes(path2));
    }
}

TEST_CASE("dump corruption and staleness handling") {
    const ConceptCorpus corpus = small_corpus();
    const TaggerModel model(act_config(corpus.vocab.size()));
    const ActivationMatrix m = extract_activations(model, corpus);
    const std::string path = temp_path("np_dump_bad.nplab");

    SUBCASE("truncated payload") {
        write_dump(m, path);
        auto bytes = read_file_bytes(path);
        bytes.resize(bytes.size() / 2);
        write_file_bytes(path, bytes);
        CHECK_THROWS_AS(read_dump(path), data_error);
    }
    SUBCASE("header row count inflated beyond the payload") {
        write_dump(m, path);
        auto bytes = read_file_bytes(path);
        bytes[6] = static_cast<std::uint8_t>(m.n_rows + 1);  // n_rows u32 after magic
        write_file_bytes(path, bytes);
        CHECK_THROWS_WITH_AS(read_dump(path), doctest::Contains("corruption"), data_error);
    }
    SUBCASE("fingerprint mismatch: strict raises, lax flags") {
        write_dump(m, path);
        ModelConfig other_config = act_config(corpus.vocab.size());
        other_config.seed = 999;
        const TaggerModel other(other_config);
        const auto expected = model_fingerprint(other);
        CHECK_THROWS_WITH_AS(read_dump(path, &expected, true), doctest::Contains("stale"),
                             data_error);
        const ActivationMatrix lax = read_dump(path, &expected, false);
        CHECK(lax.stale);
        const auto matching = model_fingerprint(model);
        CHECK_FALSE(read_dump(path, &matching, true).stale);
    }
}

TEST_CASE("binary labels recovered from dump metadata") {
    const ConceptCorpus corpus = small_corpus();
    const TaggerModel model(act_config(corpus.vocab.size()));
    const ActivationMatrix m = extract_activations(model, corpus);

    const auto from_meta =
        binary_labels_from_meta(m, ConceptLabel::parse("SEM:named_entity:location"));
    const BinaryLabelStream direct =
        concept_binary_labels(corpus, ConceptLabel::parse("SEM:named_entity:location"));
    REQUIRE(from_meta.size() == direct.labels.size());
    for (std::size_t i = 0; i < from_meta.size(); ++i)
        CHECK(from_meta[i] == direct.labels[i]);
}
