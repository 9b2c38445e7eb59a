#pragma once

#include <string>
#include <vector>

#include "nplast/activations.hpp"

namespace np {

struct HatEntry {
    std::string token;
    double score = 0.0;  // normalized variance contribution, top token = 1.0
};

struct HatSet {
    std::uint32_t neuron = 0;
    std::size_t k = 0;
    std::vector<HatEntry> entries;  // scores non-increasing, tokens unique
    bool degenerate = false;        // zero-variance neuron

    bool contains(const std::string& token) const;
};

struct HatOptions {
    std::size_t k = 5;
    // Default aggregates per token type (max squared deviation across
    // occurrences). The alternative keeps per-occurrence entries, duplicates
    // allowed.
    bool per_type = true;
};

// Token types contributing the most activation variance for one neuron:
// contribution = (a - mean)^2, normalized by the maximum so the top entry
// scores exactly 1.0. Ties break lexicographically.
HatSet extract_hats(const ActivationMatrix& matrix, std::uint32_t neuron,
                    const HatOptions& options = {});

struct HatSnapshot {
    std::string stage;
    HatSet hats;
    std::vector<std::string> reappeared;  // base-set tokens recurring here
};

struct HatEvolution {
    std::uint32_t neuron = 0;
    std::vector<HatSnapshot> snapshots;  // first entry is the base stage
};

// Per-snapshot HAT sets for one neuron; tokens from the base snapshot that
// reappear later are flagged. All snapshots must come from the same corpus.
HatEvolution hat_evolution(std::uint32_t neuron,
                           const std::vector<const ActivationMatrix*>& snapshots,
                           const std::vector<std::string>& stage_names,
                           const HatOptions& options = {});

// JSON report: array of {neuron, stage, entries, reappeared}.
std::string hat_evolution_json(const std::vector<HatEvolution>& evolutions);

}  // namespace np
