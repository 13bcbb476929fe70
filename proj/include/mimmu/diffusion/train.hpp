#pragma once

#include <cstdint>
#include <vector>

#include "mimmu/diffusion/model.hpp"
#include "mimmu/diffusion/schedule.hpp"
#include "mimmu/world/world.hpp"

namespace mimmu::diff {

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batches_per_epoch = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double dropout_a = 0.1;  // per-attribute null-token dropout, independent
    double dropout_b = 0.1;
    std::uint64_t seed = 0;
};

// Denoising-MSE pre-training with per-attribute condition dropout.
// Mutates the model in place; returns the per-epoch mean loss curve.
// Aborts on non-finite loss.
std::vector<double> pretrain(DenoiserModel& model,
                             const world::ConceptWorld& world,
                             const NoiseSchedule& schedule,
                             const TrainConfig& config);

// Mean squared deviation from the analytic denoiser, averaged over a
// uniform t grid and fresh world samples. The quality gate for any model
// feeding the estimators.
double oracle_gap(const NoisePredictor& model, const world::ConceptWorld& world,
                  const NoiseSchedule& schedule, std::size_t n_t,
                  std::size_t n_per_t, std::uint64_t seed);

}  // namespace mimmu::diff
