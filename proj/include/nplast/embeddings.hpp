#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nplast/corpus.hpp"
#include "nplast/hats.hpp"
#include "nplast/ranking.hpp"

namespace np {

// Unit-normalized token embeddings, either trained on the corpus
// (positive-PMI co-occurrence factorized by truncated SVD) or imported from
// a text word-vector table.
class EmbeddingTable {
  public:
    EmbeddingTable() = default;
    EmbeddingTable(std::size_t dim, std::string provenance)
        : dim_(dim), provenance_(std::move(provenance)) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return tokens_.size(); }
    const std::string& provenance() const { return provenance_; }

    void add(const std::string& token, const std::vector<float>& vec);
    // nullptr on lookup miss (callers skip such tokens).
    const float* lookup(const std::string& token) const;

    const std::vector<std::string>& tokens() const { return tokens_; }

  private:
    std::size_t dim_ = 0;
    std::string provenance_;
    std::vector<std::string> tokens_;
    std::map<std::string, std::uint32_t> index_;
    std::vector<float> data_;
};

// PPMI co-occurrence (symmetric window) + truncated randomized SVD.
// Deterministic given the corpus. Tokens whose PPMI row is all zero are
// omitted from the table instead of carrying a non-unit vector.
EmbeddingTable train_embeddings(const ConceptCorpus& corpus, std::size_t dim = 64,
                                std::size_t window = 5);

// Text format: one token per line, "token v1 v2 ... vdim".
EmbeddingTable import_embeddings(const std::string& path);

struct SimilarityRecord {
    std::uint32_t neuron = 0;
    std::optional<double> similarity;  // undefined when either side has no vectors
    std::size_t tokens_used_before = 0;
    std::size_t tokens_used_after = 0;
    double saliency = 0.0;  // joined from the post-retrain saliency table
};

struct SimilarityOptions {
    // The mean is unweighted by default; set to weight tokens by their HAT
    // activation scores.
    bool weight_by_score = false;
};

// Cosine between the average embedding of the pre-prune HAT set and of the
// post-retrain HAT set. OOV tokens are skipped; a side with no embeddable
// tokens (or a zero mean) leaves the similarity undefined.
SimilarityRecord concept_similarity(const HatSet& before, const HatSet& after,
                                    const EmbeddingTable& table,
                                    const SimilarityOptions& options = {});

struct ScatterPoint {
    std::uint32_t neuron = 0;
    std::size_t layer = 0;
    double saliency = 0.0;
    std::optional<double> similarity;
};

struct ScatterData {
    std::vector<ScatterPoint> points;
    // Threshold quadrants over defined similarities:
    // (high saliency, high sim), (high, low), (low, high), (low, low).
    std::size_t high_high = 0;
    std::size_t high_low = 0;
    std::size_t low_high = 0;
    std::size_t low_low = 0;
    std::optional<double> median_similarity_high_saliency;
};

ScatterData similarity_saliency_join(const std::vector<SimilarityRecord>& records,
                                     const SaliencyTable& saliency, std::size_t d,
                                     double threshold = 0.5);

// CSV export, header: neuron_id,layer,saliency,similarity,defined
std::string export_scatter_csv(const ScatterData& data);

}  // namespace np
