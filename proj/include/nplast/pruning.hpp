#pragma once

#include <string>
#include <vector>

#include "nplast/model.hpp"
#include "nplast/ranking.hpp"

namespace np {

// Marks the top floor(fraction * N) neurons of the ranking as pruned.
PruneMask build_mask(const NeuronRanking& ranking, double fraction, std::size_t n_layers_plus1,
                     std::size_t d);

// Uniform sample without replacement from `pool` (empty pool = all neurons).
PruneMask random_mask(std::size_t count, std::size_t n_layers_plus1, std::size_t d,
                      std::uint64_t seed, const std::vector<std::uint32_t>& pool = {});

// Merges the mask into the model (elementwise minimum with the current one)
// and zeroes the producing weights/biases and outgoing columns of every
// pruned unit, so the masked-forward model and the weight-zeroed model are
// numerically identical.
void apply_mask(TaggerModel& model, const PruneMask& mask);

// Elementwise minimum: pruned-by-either.
PruneMask combine_masks(const PruneMask& a, const PruneMask& b);

// CSV export, header: layer,index,alive
std::string export_mask_csv(const PruneMask& mask);

}  // namespace np
