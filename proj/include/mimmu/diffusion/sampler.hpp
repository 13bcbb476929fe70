#pragma once

#include <cstdint>
#include <vector>

#include "mimmu/diffusion/predictor.hpp"
#include "mimmu/diffusion/schedule.hpp"

namespace mimmu::diff {

// Number of worker threads used by chain-parallel sampling. Results are
// independent of this setting; chains own their RNG streams.
void set_sampler_threads(int n);
int sampler_threads();

// Full ancestral chain with classifier-free guidance; null prompts fall
// back to the unconditional prediction. Chain i is deterministic given
// (seed, i) and independent of batch composition.
std::vector<std::vector<double>> sample(const NoisePredictor& model,
                                        const NoiseSchedule& schedule,
                                        const world::ConceptPrompt& prompt,
                                        double gamma, std::size_t n,
                                        std::uint64_t seed);

// Runs the chain from T down to stop_t and returns the intermediate
// latent; stop_t == T returns the initial Gaussian draw.
std::vector<double> partial_sample(const NoisePredictor& model,
                                   const NoiseSchedule& schedule,
                                   const world::ConceptPrompt& prompt,
                                   double gamma, std::size_t stop_t,
                                   std::uint64_t seed);

// Batched form of partial_sample, one latent per chain (row-major n x d).
std::vector<double> partial_sample_batch(const NoisePredictor& model,
                                         const NoiseSchedule& schedule,
                                         const world::ConceptPrompt& prompt,
                                         double gamma, std::size_t stop_t,
                                         std::size_t n, std::uint64_t seed);

// Per-chain prompts and stopping points; chain i runs from T down to
// stop_ts[i] on its own noise stream, all chains advancing through
// shared batched predictions. Row i equals the single-chain result for
// the same chain seed.
std::vector<double> partial_sample_batch(
    const NoisePredictor& model, const NoiseSchedule& schedule,
    const std::vector<world::ConceptPrompt>& prompts, double gamma,
    const std::vector<std::size_t>& stop_ts, std::uint64_t seed);

}  // namespace mimmu::diff
