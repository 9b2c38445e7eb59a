#pragma once

#include <optional>
#include <string>

#include "nplast/model.hpp"
#include "nplast/optimizer.hpp"

namespace np {

// Versioned binary container, magic "NPCKPT". Holds config, mask, all
// parameter tensors and (optionally) optimizer moments plus schedule
// position, so a resumed run continues with the identical next lr.
void save_checkpoint(const TaggerModel& model, const OptimizerState* opt_state,
                     const std::string& path);

struct LoadedCheckpoint {
    TaggerModel model;
    std::optional<OptimizerState> opt_state;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// SHA-256 over config, mask and parameter tensors (not optimizer state).
// Identifies the exact weights an activation dump was extracted from.
std::vector<std::uint8_t> model_fingerprint(const TaggerModel& model);

}  // namespace np
