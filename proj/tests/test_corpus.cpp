#include <filesystem>
#include <set>

#include "doctest.h"
#include "nplast/corpus.hpp"

using namespace np;

namespace {

CorpusSpec tiny_spec() {
    CorpusSpec spec;
    spec.n_sentences = 1;
    spec.max_len = 5;
    const ConceptLabel loc = ConceptLabel::parse("SEM:named_entity:location");
    const ConceptLabel per = ConceptLabel::parse("SEM:named_entity:person");
    spec.lexicons[loc] = {"paris"};
    spec.lexicons[per] = {"alice"};
    spec.tag_names[loc] = "LOC";
    spec.tag_names[per] = "PER";
    spec.templates = {{"{SEM:named_entity:person}", "visited", "{SEM:named_entity:location}"}};
    return spec;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("concept label parsing and hierarchy") {
    const ConceptLabel loc = ConceptLabel::parse("SEM:named_entity:location");
    const ConceptLabel usa = ConceptLabel::parse("SEM:named_entity:location:usa");
    const ConceptLabel canada = ConceptLabel::parse("SEM:named_entity:location:canada");

    CHECK(loc.str() == "SEM:named_entity:location");
    CHECK(loc.is_ancestor_of(usa));
    CHECK_FALSE(usa.is_ancestor_of(loc));
    CHECK_FALSE(loc.is_ancestor_of(loc));
    CHECK(usa.is_sibling_of(canada));
    CHECK_FALSE(usa.is_sibling_of(usa));
    CHECK(usa.parent() == loc);
    CHECK_THROWS_AS(ConceptLabel::parse(""), config_error);
}

TEST_CASE("template generation fills slots with tags and ancestor-closed concepts") {
    const ConceptCorpus corpus = generate_corpus(tiny_spec(), 7);
    REQUIRE(corpus.sentences.size() == 1);
    const auto& sent = corpus.sentences[0];
    REQUIRE(sent.size() == 3);
    CHECK(sent[0].text == "alice");
    CHECK(sent[0].bio_tag == "B-PER");
    CHECK(sent[1].text == "visited");
    CHECK(sent[1].bio_tag == "O");
    CHECK(sent[2].text == "paris");
    CHECK(sent[2].bio_tag == "B-LOC");

    const ConceptLabel per = ConceptLabel::parse("SEM:named_entity:person");
    const ConceptLabel ne = ConceptLabel::parse("SEM:named_entity");
    CHECK(std::count(sent[0].concepts.begin(), sent[0].concepts.end(), per) == 1);
    CHECK(std::count(sent[0].concepts.begin(), sent[0].concepts.end(), ne) == 1);
    CHECK(sent[1].concepts.empty());
}

TEST_CASE("generation is deterministic per (spec, seed)") {
    const CorpusSpec spec = default_corpus_spec(50, 0.2);
    const ConceptCorpus a = generate_corpus(spec, 11);
    const ConceptCorpus b = generate_corpus(spec, 11);
    const ConceptCorpus c = generate_corpus(spec, 12);
    CHECK(a == b);
    CHECK(a.sentences != c.sentences);

    const std::string pa = temp_path("np_corpus_a.jsonl");
    const std::string pb = temp_path("np_corpus_b.jsonl");
    write_corpus(a, pa);
    write_corpus(b, pb);
    CHECK(read_file_bytes(pa) == read_file_bytes(pb));
}

TEST_CASE("sub-concept tokens carry the sub label and its ancestors, never siblings") {
    CorpusSpec spec;
    spec.n_sentences = 20;
    spec.max_len = 4;
    const ConceptLabel usa = ConceptLabel::parse("SEM:named_entity:location:usa");
    const ConceptLabel canada = ConceptLabel::parse("SEM:named_entity:location:canada");
    spec.lexicons[usa] = {"boston"};
    spec.lexicons[canada] = {"toronto"};
    spec.tag_names[ConceptLabel::parse("SEM:named_entity:location")] = "LOC";
    spec.templates = {{"in", "{SEM:named_entity:location}", "today"}};
    const ConceptCorpus corpus = generate_corpus(spec, 3);

    const ConceptLabel loc = ConceptLabel::parse("SEM:named_entity:location");
    bool saw_boston = false;
    for (const auto& sent : corpus.sentences) {
        for (const auto& tok : sent) {
            if (tok.text != "boston") continue;
            saw_boston = true;
            CHECK(std::count(tok.concepts.begin(), tok.concepts.end(), usa) == 1);
            CHECK(std::count(tok.concepts.begin(), tok.concepts.end(), loc) == 1);
            CHECK(std::count(tok.concepts.begin(), tok.concepts.end(), canada) == 0);
        }
    }
    CHECK(saw_boston);
}

TEST_CASE("sibling lexicons must be disjoint") {
    CorpusSpec spec;
    spec.n_sentences = 1;
    spec.max_len = 3;
    spec.lexicons[ConceptLabel::parse("SEM:named_entity:location:usa")] = {"springfield"};
    spec.lexicons[ConceptLabel::parse("SEM:named_entity:location:canada")] = {"springfield"};
    spec.templates = {{"in", "{SEM:named_entity:location:usa}"}};
    CHECK_THROWS_AS(generate_corpus(spec, 1), config_error);
}

TEST_CASE("empty lexicon for a referenced slot is a specification error") {
    CorpusSpec spec = tiny_spec();
    spec.templates.push_back({"{SEM:named_entity:organization}", "rose"});
    CHECK_THROWS_AS(generate_corpus(spec, 1), config_error);
}

TEST_CASE("corpus file round-trip preserves structure") {
    const ConceptCorpus corpus = generate_corpus(default_corpus_spec(40, 0.2), 5);
    const std::string path = temp_path("np_corpus_rt.jsonl");
    write_corpus(corpus, path);
    const ConceptCorpus loaded = read_corpus(path);
    CHECK(loaded == corpus);
}

TEST_CASE("reader rejects malformed input") {
    const std::string path = temp_path("np_corpus_bad.jsonl");

    SUBCASE("BIO violation: I- without opener") {
        write_file_text(path,
                        R"({"tokens":["a","b"],"tags":["O","I-LOC"],"concepts":[[],["SEM:named_entity:location"]]})"
                        "\n");
        CHECK_THROWS_AS(read_corpus(path), data_error);
    }
    SUBCASE("length mismatch") {
        write_file_text(path, R"({"tokens":["a","b"],"tags":["O"],"concepts":[[],[]]})" "\n");
        CHECK_THROWS_AS(read_corpus(path), data_error);
    }
    SUBCASE("blank line forbidden") {
        write_file_text(path,
                        R"({"tokens":["a"],"tags":["O"],"concepts":[[]]})" "\n\n");
        CHECK_THROWS_WITH_AS(read_corpus(path), doctest::Contains("line 2"), data_error);
    }
    SUBCASE("entity token without concepts") {
        write_file_text(path, R"({"tokens":["x"],"tags":["B-LOC"],"concepts":[[]]})" "\n");
        CHECK_THROWS_AS(read_corpus(path), data_error);
    }
}

TEST_CASE("empty file loads as empty corpus") {
    const std::string path = temp_path("np_corpus_empty.jsonl");
    write_file_text(path, "");
    const ConceptCorpus corpus = read_corpus(path);
    CHECK(corpus.sentences.empty());
    CHECK(corpus.vocab.empty());
}

TEST_CASE("split sizes, determinism and partition") {
    const ConceptCorpus corpus = generate_corpus(default_corpus_spec(10, 0.2), 3);

    SUBCASE("8/1/1 sizes") {
        const CorpusSplits s = split_corpus(corpus, SplitRatios{0.8, 0.1, 0.1}, 9);
        CHECK(s.train.sentences.size() == 8);
        CHECK(s.dev.sentences.size() == 1);
        CHECK(s.test.sentences.size() == 1);

        // partition: multiset of sentences equals the input
        std::multiset<std::string> in, out;
        auto key = [](const std::vector<AnnotatedToken>& sent) {
            std::string k;
            for (const auto& t : sent) k += t.text + "|";
            return k;
        };
        for (const auto& sent : corpus.sentences) in.insert(key(sent));
        for (const ConceptCorpus* part : {&s.train, &s.dev, &s.test})
            for (const auto& sent : part->sentences) out.insert(key(sent));
        CHECK(in == out);

        // splits adopt the parent vocabulary
        CHECK(s.train.vocab == corpus.vocab);
        CHECK(s.dev.vocab == corpus.vocab);
    }
    SUBCASE("zero-ratio splits are exactly empty") {
        const CorpusSplits s = split_corpus(corpus, SplitRatios{1.0, 0.0, 0.0}, 9);
        CHECK(s.train.sentences.size() == 10);
        CHECK(s.dev.sentences.empty());
        CHECK(s.test.sentences.empty());
    }
    SUBCASE("same seed gives identical partition") {
        const CorpusSplits a = split_corpus(corpus, SplitRatios{0.8, 0.1, 0.1}, 4);
        const CorpusSplits b = split_corpus(corpus, SplitRatios{0.8, 0.1, 0.1}, 4);
        CHECK(a.train.sentences == b.train.sentences);
        CHECK(a.test.sentences == b.test.sentences);
    }
    SUBCASE("bad ratios rejected") {
        CHECK_THROWS_AS(split_corpus(corpus, SplitRatios{0.5, 0.2, 0.2}, 1), config_error);
    }
}

TEST_CASE("binary concept labels follow the descendant rule") {
    const ConceptCorpus corpus = generate_corpus(tiny_spec(), 7);
    const ConceptLabel loc = ConceptLabel::parse("SEM:named_entity:location");

    const BinaryLabelStream stream = concept_binary_labels(corpus, loc);
    REQUIRE(stream.labels.size() == 3);
    CHECK(stream.labels[0] == 0);  // alice
    CHECK(stream.labels[1] == 0);  // visited
    CHECK(stream.labels[2] == 1);  // paris
    CHECK(stream.concept_found);

    SUBCASE("descendant labels count as positive for the ancestor") {
        CorpusSpec spec;
        spec.n_sentences = 4;
        spec.max_len = 3;
        spec.lexicons[ConceptLabel::parse("SEM:named_entity:location:usa")] = {"boston"};
        spec.tag_names[ConceptLabel::parse("SEM:named_entity:location")] = "LOC";
        spec.templates = {{"near", "{SEM:named_entity:location:usa}"}};
        const ConceptCorpus sub = generate_corpus(spec, 1);
        const BinaryLabelStream s = concept_binary_labels(sub, loc);
        CHECK(s.positive_count == 4);
    }
    SUBCASE("absent concept yields all-negative with diagnostic flag") {
        const BinaryLabelStream s =
            concept_binary_labels(corpus, ConceptLabel::parse("SEM:nope"));
        CHECK_FALSE(s.concept_found);
        CHECK(s.positive_count == 0);
        CHECK(s.labels.size() == 3);
    }
}

TEST_CASE("default spec yields a BIO-consistent corpus at scale") {
    const ConceptCorpus corpus = generate_corpus(default_corpus_spec(300, 0.5), 21);
    CHECK_FALSE(check_bio(corpus.sentences).has_value());
    CHECK(corpus.vocab.size() > 300);
    // ancestor closure is a checked property of every generated corpus
    for (const auto& sent : corpus.sentences)
        for (const auto& tok : sent)
            for (const auto& c : tok.concepts)
                if (c.depth() > 2) {
                    const ConceptLabel parent = c.parent();
                    CHECK(std::count(tok.concepts.begin(), tok.concepts.end(), parent) == 1);
                }
}
