#include "mimmu/numerics/optimizer.hpp"

#include <cmath>

namespace mimmu::num {

void optimizer_step(ParamVector& params, const std::vector<double>& grads,
                    OptimizerState& state) {
    const std::size_t n = params.size();
    if (grads.size() != n)
        throw std::invalid_argument("optimizer_step: gradient size mismatch");
    state.step += 1;
    if (state.kind == OptKind::sgd) {
        for (std::size_t i = 0; i < n; ++i)
            params[i] -= state.learning_rate * grads[i];
        return;
    }
    if (state.m.size() != n || state.v.size() != n)
        throw std::invalid_argument("optimizer_step: moment size mismatch");
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

void ema_update(ParamVector& ema, const ParamVector& current, double decay) {
    if (decay < 0.0 || decay >= 1.0)
        throw std::invalid_argument("ema_update: decay must be in [0, 1)");
    if (ema.size() != current.size())
        throw std::invalid_argument("ema_update: size mismatch");
    for (std::size_t i = 0; i < ema.size(); ++i)
        ema[i] = decay * ema[i] + (1.0 - decay) * current[i];
}

}  // namespace mimmu::num
