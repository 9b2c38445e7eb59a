#include "nplast/optimizer.hpp"

#include <cmath>

namespace np {

OptimizerState OptimizerState::create(const TaggerModel& model, const LrSchedule& schedule,
                                      double weight_decay) {
    OptimizerState state;
    state.schedule = schedule;
    state.weight_decay = weight_decay;
    state.m.reserve(model.params().size());
    state.v.reserve(model.params().size());
    for (const auto& t : model.params()) {
        state.m.emplace_back(t.size(), 0.0);
        state.v.emplace_back(t.size(), 0.0);
    }
    return state;
}

void adamw_step(TaggerModel& model, OptimizerState& state, const Gradients& grads) {
    if (state.schedule.total_steps > 0 && state.step >= state.schedule.total_steps)
        throw config_error("adamw_step: schedule exhausted");
    if (grads.g.size() != model.params().size())
        throw config_error("adamw_step: gradient layout mismatch");

    for (const auto& t : grads.g)
        for (double v : t)
            if (!std::isfinite(v)) throw numeric_error("adamw_step: non-finite gradient");

    const std::uint64_t t = state.step + 1;
    const double lr = state.schedule.lr_at(t);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));

    for (std::size_t i = 0; i < grads.g.size(); ++i) {
        auto& theta = model.params()[i].data;
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads.g[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            theta[j] -= lr * (m_hat / (std::sqrt(v_hat) + state.eps)) +
                        lr * state.weight_decay * theta[j];
        }
    }
    state.step = t;
    model.zero_masked_params();
}

}  // namespace np
