#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mimmu/numerics/param_vector.hpp"

namespace mimmu::num {

enum class OptKind { sgd, adam };

struct OptimizerState {
    OptKind kind = OptKind::adam;
    std::size_t step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m;  // first moment (adam only)
    std::vector<double> v;  // second moment (adam only)

    static OptimizerState sgd_state(double lr) {
        OptimizerState s;
        s.kind = OptKind::sgd;
        s.learning_rate = lr;
        return s;
    }
    static OptimizerState adam_state(double lr, std::size_t n_params) {
        OptimizerState s;
        s.kind = OptKind::adam;
        s.learning_rate = lr;
        s.m.assign(n_params, 0.0);
        s.v.assign(n_params, 0.0);
        return s;
    }
};

// Standard Adam with bias correction (or plain SGD). Mutates params and
// state in place; increments the step counter.
void optimizer_step(ParamVector& params, const std::vector<double>& grads,
                    OptimizerState& state);

// ema <- decay * ema + (1 - decay) * current, elementwise. 0 <= decay < 1.
void ema_update(ParamVector& ema, const ParamVector& current, double decay);

}  // namespace mimmu::num
