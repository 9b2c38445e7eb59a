#include "nplast/pruning.hpp"

#include <sstream>

namespace np {

PruneMask build_mask(const NeuronRanking& ranking, double fraction, std::size_t n_layers_plus1,
                     std::size_t d) {
    if (fraction < 0.0 || fraction > 1.0)
        throw config_error("build_mask: fraction must be in [0,1]");
    if (ranking.order.size() != n_layers_plus1 * d)
        throw config_error("build_mask: ranking does not cover the neuron grid");
    PruneMask mask(n_layers_plus1, d);
    const std::size_t n_pruned =
        static_cast<std::size_t>(fraction * static_cast<double>(ranking.order.size()));
    for (std::size_t rank = 0; rank < n_pruned; ++rank)
        mask.set_global(ranking.order[rank], false);
    return mask;
}

PruneMask random_mask(std::size_t count, std::size_t n_layers_plus1, std::size_t d,
                      std::uint64_t seed, const std::vector<std::uint32_t>& pool) {
    PruneMask mask(n_layers_plus1, d);
    std::vector<std::uint32_t> candidates = pool;
    if (candidates.empty()) {
        candidates.resize(mask.size());
        for (std::size_t i = 0; i < candidates.size(); ++i)
            candidates[i] = static_cast<std::uint32_t>(i);
    }
    if (count > candidates.size())
        throw data_error("random_mask: count " + std::to_string(count) + " exceeds pool size " +
                         std::to_string(candidates.size()));
    Rng rng(seed);
    const auto picks = rng.sample_without_replacement(candidates.size(), count);
    for (std::size_t p : picks) mask.set_global(candidates[p], false);
    return mask;
}

void apply_mask(TaggerModel& model, const PruneMask& mask) {
    // Merging keeps composition lawful: applying A then B equals applying
    // min(A, B), and already-pruned units can never come back.
    model.set_mask(combine_masks(model.mask(), mask));
    model.zero_masked_params();
}

PruneMask combine_masks(const PruneMask& a, const PruneMask& b) {
    if (a.layers() != b.layers() || a.width() != b.width())
        throw config_error("combine_masks: dimension mismatch");
    PruneMask out(a.layers(), a.width());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.bits()[i] = a.bits()[i] & b.bits()[i];
    return out;
}

std::string export_mask_csv(const PruneMask& mask) {
    std::ostringstream out;
    out << "layer,index,alive\n";
    for (std::size_t l = 0; l < mask.layers(); ++l)
        for (std::size_t i = 0; i < mask.width(); ++i)
            out << l << ',' << i << ',' << (mask.alive(l, i) ? 1 : 0) << '\n';
    return out.str();
}

}  // namespace np
