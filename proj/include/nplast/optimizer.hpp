#pragma once

#include <cstdint>
#include <vector>

#include "nplast/model.hpp"

namespace np {

// Piecewise-linear learning rate with warmup. Steps are 1-indexed: the first
// optimizer step sees t=1, so lr starts at base/warmup rather than 0, peaks
// at t=warmup and decays linearly to 0 at t=total.
struct LrSchedule {
    double base_lr = 3e-4;
    std::uint64_t warmup_steps = 0;
    std::uint64_t total_steps = 0;

    double lr_at(std::uint64_t step) const {
        if (total_steps == 0) return base_lr;
        if (warmup_steps > 0 && step <= warmup_steps)
            return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
        if (step >= total_steps) return 0.0;
        const double remain = static_cast<double>(total_steps - step);
        const double span = static_cast<double>(total_steps - warmup_steps);
        return span > 0 ? base_lr * remain / span : 0.0;
    }
};

struct OptimizerState {
    std::vector<std::vector<double>> m;  // first moments, parallel to params
    std::vector<std::vector<double>> v;  // second moments
    std::uint64_t step = 0;              // completed steps
    LrSchedule schedule;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerState create(const TaggerModel& model, const LrSchedule& schedule,
                                 double weight_decay);
};

// One AdamW update with decoupled weight decay and bias-corrected moments.
// Rejects non-finite gradients before mutating any state. Re-applies the
// model's parameter mask afterwards so pruned units stay exactly zero.
void adamw_step(TaggerModel& model, OptimizerState& state, const Gradients& grads);

}  // namespace np
