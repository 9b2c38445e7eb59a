#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nplast/common.hpp"

namespace np {

// Hierarchical concept label, e.g. SEM:named_entity:location:usa.
// A label is an ancestor of another iff its path is a strict prefix.
class ConceptLabel {
  public:
    ConceptLabel() = default;
    explicit ConceptLabel(std::vector<std::string> path);

    // Parses a ':'-separated path string.
    static ConceptLabel parse(const std::string& text);

    const std::vector<std::string>& path() const { return path_; }
    std::size_t depth() const { return path_.size(); }
    std::string str() const;

    bool is_ancestor_of(const ConceptLabel& other) const;
    // Siblings share everything but the last segment.
    bool is_sibling_of(const ConceptLabel& other) const;
    ConceptLabel parent() const;

    bool operator==(const ConceptLabel& other) const { return path_ == other.path_; }
    bool operator!=(const ConceptLabel& other) const { return !(*this == other); }
    bool operator<(const ConceptLabel& other) const { return path_ < other.path_; }

  private:
    std::vector<std::string> path_;
};

struct AnnotatedToken {
    std::string text;
    std::string bio_tag;                  // "O", "B-X" or "I-X"
    std::vector<ConceptLabel> concepts;   // sorted, unique, ancestor-closed

    bool operator==(const AnnotatedToken& other) const = default;
};

struct TokenPosition {
    std::size_t sentence = 0;
    std::size_t token = 0;
    bool operator==(const TokenPosition& other) const = default;
};

struct ConceptCorpus {
    std::vector<std::vector<AnnotatedToken>> sentences;
    std::vector<std::string> vocab;                       // id -> token text
    std::map<std::string, std::uint32_t> vocab_ids;       // token text -> id
    std::map<ConceptLabel, std::vector<TokenPosition>> concept_index;

    std::size_t token_count() const;
    // Tag vocabulary: "O" first, the rest sorted.
    std::vector<std::string> tag_set() const;

    // Rebuilds vocab (first-occurrence order) and the concept index from
    // `sentences`. Used after construction or mutation of the sentence list.
    void reindex();
    // Rebuilds the concept index but adopts an existing vocabulary. Tokens
    // must all be covered by it.
    void reindex_with_vocab(const std::vector<std::string>& parent_vocab);

    bool operator==(const ConceptCorpus& other) const {
        return sentences == other.sentences && vocab == other.vocab;
    }
};

// A sentence skeleton: literal tokens, with concept slots written as
// "{<label path>}", e.g. {SEM:named_entity:location}. A slot draws an entry
// from the lexicons of that label and all of its descendants.
struct CorpusSpec {
    std::size_t n_sentences = 0;
    std::size_t max_len = 0;
    // Lexicon entries may be multi-token phrases (space-separated), which
    // generate B-X I-X ... spans.
    std::map<ConceptLabel, std::vector<std::string>> lexicons;
    std::vector<std::vector<std::string>> templates;
    double entity_rate = 0.0;  // expected entities per sentence (informational)
    // BIO type name per slot label; falls back to the uppercased last path
    // segment when a slot's label has no entry.
    std::map<ConceptLabel, std::string> tag_names;

    void validate() const;
};

// Default desk-scale spec: 4 entity types (LOC, PER, ORG, MISC), sub-concepts
// usa/canada/mexico under location, procedural lexicons, ~1.5 entities per
// sentence. `scale` multiplies lexicon sizes (1.0 gives |V| near 2000).
CorpusSpec default_corpus_spec(std::size_t n_sentences = 4000, double scale = 1.0);

// Small-vocabulary spec used to track known HAT sets across retraining.
CorpusSpec hat_fixture_spec(std::size_t n_sentences = 600);

ConceptCorpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed);

void write_corpus(const ConceptCorpus& corpus, const std::string& path);
ConceptCorpus read_corpus(const std::string& path);

struct SplitRatios {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

struct CorpusSplits {
    ConceptCorpus train;
    ConceptCorpus dev;
    ConceptCorpus test;
};

// Partitions by sentence; every split keeps the parent vocabulary so token
// ids stay consistent across splits.
CorpusSplits split_corpus(const ConceptCorpus& corpus, const SplitRatios& ratios,
                          std::uint64_t seed);

// One 0/1 label per token in corpus order. Positive iff the token carries
// `concept` or any descendant of it. An absent concept yields an all-negative
// stream and sets `concept_found` to false.
struct BinaryLabelStream {
    std::vector<std::uint8_t> labels;
    bool concept_found = true;
    std::size_t positive_count = 0;
};

BinaryLabelStream concept_binary_labels(const ConceptCorpus& corpus, const ConceptLabel& label);

// BIO well-formedness check; returns a human-readable violation or nullopt.
std::optional<std::string> check_bio(const std::vector<std::vector<AnnotatedToken>>& sentences);

}  // namespace np
