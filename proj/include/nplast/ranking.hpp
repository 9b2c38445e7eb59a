#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nplast/activations.hpp"
#include "nplast/model.hpp"

namespace np {

// Per-class mean activation vectors q(z), accumulated in f64 in row order
// with a single final division (the brute-force oracle mirrors this).
struct ClassMeans {
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> means;  // per class, length D
    std::vector<std::size_t> counts;
};

ClassMeans class_mean_vectors(const ActivationMatrix& matrix,
                              const std::vector<std::uint32_t>& labels,
                              const std::vector<std::string>& class_names);

struct NeuronRanking {
    std::string concept_name;
    std::vector<std::uint32_t> order;  // rank -> global neuron id, best first
    std::vector<double> scores;        // neuron id -> r-value
};

// r(z)[j] = sum over z' != z of |q(z)[j] - q(z')[j]|, arg-sorted descending.
// Ties break by ascending neuron id.
NeuronRanking probeless_rank(const ClassMeans& means, std::size_t target_class);

struct ProbeOptions {
    std::vector<double> lambdas = {20.0};  // L2 strengths; scores averaged across them
    std::size_t iterations = 400;
    double learning_rate = 0.05;
    bool class_balanced = true;
};

// Logistic-regression probe on raw activations; neurons are ordered by
// accumulating them at increasing cumulative |weight|-mass percentiles,
// which is the descending-|w| order. Deterministic (zero initialization,
// full-batch updates).
NeuronRanking linear_probe_rank(const ActivationMatrix& matrix,
                                const std::vector<std::uint32_t>& labels,
                                const ProbeOptions& options = {});

// Grouped normalized saliency. Group g of G consecutive ranking positions
// scores (G - g) / G, so the top group scores exactly 1.0.
struct SaliencyTable {
    std::size_t group_size = 0;
    std::size_t n_groups = 0;
    // Per global neuron id; NaN for neurons not covered (e.g. pruned ones
    // when alive_only was set).
    std::vector<double> saliency;

    bool covered(std::size_t neuron) const { return !std::isnan(saliency[neuron]); }
};

SaliencyTable saliency_scores(const NeuronRanking& ranking, std::size_t group_size,
                              bool alive_only, const PruneMask& mask);

struct LayerSaliency {
    std::size_t alive = 0;
    std::size_t salient = 0;  // alive neurons with saliency > threshold
    std::optional<double> mean_saliency;
    std::optional<double> pct_salient;  // 100 * (salient/alive) / sum over layers
};

struct LayerSaliencySummary {
    double threshold = 0.5;
    std::vector<LayerSaliency> layers;
};

LayerSaliencySummary layer_saliency_summary(const SaliencyTable& table, const PruneMask& mask,
                                            double threshold);

// CSV export, header: neuron_id,layer,index,score,rank,saliency
std::string export_ranking_csv(const NeuronRanking& ranking, const SaliencyTable& table,
                               std::size_t d);

}  // namespace np
