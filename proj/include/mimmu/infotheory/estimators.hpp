#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mimmu/diffusion/predictor.hpp"
#include "mimmu/diffusion/schedule.hpp"
#include "mimmu/world/world.hpp"

namespace mimmu::info {

// Trapezoidal quadrature grid over log-SNR. Nodes are strictly
// decreasing (high SNR first); weights are positive and sum to the
// span of the truncation interval.
struct LogSnrGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
    double alpha_min = -10.0;
    double alpha_max = 10.0;

    static LogSnrGrid uniform(std::size_t n = 64, double lo = -10.0,
                              double hi = 10.0);
    void validate() const;  // >= 16 nodes, decreasing, inside bounds
    std::string id() const;
};

// Exact-by-construction split: value = gaussian_reference_term +
// correction_integral, all in nats.
struct DensityEstimate {
    double value = 0.0;
    double gaussian_reference_term = 0.0;
    double correction_integral = 0.0;
    double std_error = 0.0;  // MC error of the correction integral
    std::vector<double> mmse_model;  // per grid node
    std::vector<double> mmse_gauss;  // per grid node
    std::size_t n_eps = 0;
    std::uint64_t seed = 0;
};

enum class MiKind { naive, nonneg };

struct MIEstimate {
    double value = 0.0;  // nats
    MiKind kind = MiKind::nonneg;
    std::vector<double> node_contrib;  // weighted per-node integrand halves
    double std_error = 0.0;
    std::size_t n_eps = 0;
    std::uint64_t seed = 0;
};

// MC average over eps of |eps - model(x_alpha)|^2 with
// x_alpha = sqrt(sigmoid(alpha)) x + sqrt(sigmoid(-alpha)) eps.
double mmse_point(const diff::NoisePredictor& model,
                  const std::vector<double>& x, double alpha,
                  const world::ConceptPrompt& prompt, std::size_t n_eps,
                  std::uint64_t seed);

// Closed-form pointwise MMSE of the standard-normal source through the
// same channel: abar * (abar * d + (1 - abar) * |x|^2), abar = sigmoid(alpha).
double gaussian_reference_mmse(const std::vector<double>& x, double alpha);

// -log p(x [| prompt]) via the noise-level integral against the
// standard-normal reference. Conditional when the prompt is non-null.
DensityEstimate neg_log_density(const diff::NoisePredictor& model,
                                const std::vector<double>& x,
                                const world::ConceptPrompt& prompt,
                                const LogSnrGrid& grid, std::size_t n_eps,
                                std::uint64_t seed);

// Pointwise MI between x and the prompted attributes. Both branches of
// each estimator share the same noised inputs; naive = nonneg + twice the
// orthogonality cross term, exactly, draw by draw.
MIEstimate mi_naive(const diff::NoisePredictor& model,
                    const std::vector<double>& x,
                    const world::ConceptPrompt& prompt, const LogSnrGrid& grid,
                    std::size_t n_eps, std::uint64_t seed);
MIEstimate mi_nonneg(const diff::NoisePredictor& model,
                     const std::vector<double>& x,
                     const world::ConceptPrompt& prompt,
                     const LogSnrGrid& grid, std::size_t n_eps,
                     std::uint64_t seed);

// Batch means over a set of points (row-major n x d), same seed layout
// per point index. std_error is across points.
MIEstimate mi_naive_batch(const diff::NoisePredictor& model,
                          const std::vector<std::vector<double>>& xs,
                          const world::ConceptPrompt& prompt,
                          const LogSnrGrid& grid, std::size_t n_eps,
                          std::uint64_t seed);
MIEstimate mi_nonneg_batch(const diff::NoisePredictor& model,
                           const std::vector<std::vector<double>>& xs,
                           const world::ConceptPrompt& prompt,
                           const LogSnrGrid& grid, std::size_t n_eps,
                           std::uint64_t seed);

// Integral of the cross term E[(eps_u - eps_c) . (eps_c - eps)] over the
// grid, with draws shared with mi_naive/mi_nonneg at the same seed, so
// mi_naive - mi_nonneg == cross_term_integral exactly.
double cross_term_integral(const diff::NoisePredictor& model,
                           const std::vector<double>& x,
                           const world::ConceptPrompt& prompt,
                           const LogSnrGrid& grid, std::size_t n_eps,
                           std::uint64_t seed);

struct ResidualCurve {
    std::vector<double> value;      // per grid node
    std::vector<double> std_error;  // per grid node
};

// Cross term E[(eps_u - eps_c) . (eps_c - eps)] per node, expectation
// over x ~ world conditional on the prompt and over eps.
ResidualCurve orthogonality_residual(const diff::NoisePredictor& model,
                                     const world::ConceptWorld& world,
                                     const world::ConceptPrompt& prompt,
                                     const LogSnrGrid& grid, std::size_t n_x,
                                     std::size_t n_eps, std::uint64_t seed);

// Half squared CFG gap at a discrete timestep, averaged over eps draws
// around a clean x.
double mi_at_timestep(const diff::NoisePredictor& teacher,
                      const std::vector<double>& x, std::size_t t,
                      const diff::NoiseSchedule& schedule,
                      const world::ConceptPrompt& prompt, std::size_t n_eps,
                      std::uint64_t seed);

// One JSON line per estimate: {kind, value, se, grid_id, n_eps, seed}.
std::string report_line(const MIEstimate& e, const LogSnrGrid& grid);
std::string report_line(const DensityEstimate& e, const LogSnrGrid& grid);

}  // namespace mimmu::info
