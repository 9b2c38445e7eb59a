#pragma once

#include <map>
#include <string>
#include <vector>

#include "nplast/embeddings.hpp"
#include "nplast/metrics.hpp"
#include "nplast/ranking.hpp"

namespace np {

// A pair of rendered report bodies: a 3-decimal CSV table and a
// full-precision JSON mirror (written next to it with a .json suffix).
struct Report {
    std::string csv;
    std::string json;
};

// Stage rows ordered Base, Pruned, then ascending retrain epochs. Values are
// means and sample standard deviations across runs.
Report performance_table(const std::vector<std::string>& stages,
                         const std::vector<std::map<std::string, Prf>>& runs);

// Columns layer,base_pct,retrained_pct plus argmax flags per column.
Report distribution_table(const LayerSaliencySummary& base,
                          const LayerSaliencySummary& retrained);

// Series over stages: epoch,layer,mean_saliency. The base stage is epoch 0
// and the pruned stage is labeled "post-prune".
Report saliency_trajectory(const std::vector<std::pair<std::string, LayerSaliencySummary>>& stages);

// Per-stage, per-layer defined similarities; emits mean and the 95% CI
// half-width 1.96*sd/sqrt(n).
struct LayerSimilarities {
    std::vector<std::vector<double>> by_layer;  // defined similarities per layer
};

Report similarity_trajectory(
    const std::vector<std::pair<std::string, LayerSimilarities>>& stages);

// Collects per-layer defined similarities from joined scatter points.
LayerSimilarities collect_layer_similarities(const ScatterData& scatter, std::size_t n_layers);

}  // namespace np
