#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mimmu/world/world.hpp"

namespace mimmu::diff {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Anything that predicts the channel noise from a noised input at a
// given log-SNR. Implemented by the learned denoiser and by the world's
// analytic oracle; the estimators only see this surface.
class NoisePredictor {
   public:
    virtual ~NoisePredictor() = default;
    virtual std::size_t dim() const = 0;

    // x_alpha = sqrt(sigmoid(alpha)) x + sqrt(sigmoid(-alpha)) eps
    virtual std::vector<double> predict(const std::vector<double>& x_alpha,
                                        double alpha,
                                        const world::ConceptPrompt& prompt)
        const = 0;

    // Row-major batch (n x dim); default loops over rows.
    virtual std::vector<double> predict_batch(
        const std::vector<double>& x_alpha, const std::vector<double>& alphas,
        const std::vector<world::ConceptPrompt>& prompts) const;
};

// The world's MMSE-optimal denoiser behind the predictor surface.
class OracleDenoiser : public NoisePredictor {
   public:
    explicit OracleDenoiser(const world::ConceptWorld& w) : world_(w) {}
    std::size_t dim() const override { return world_.dim(); }
    std::vector<double> predict(const std::vector<double>& x_alpha,
                                double alpha,
                                const world::ConceptPrompt& prompt)
        const override {
        return world_.analytic_denoiser(x_alpha, sigmoid(alpha), prompt);
    }

   private:
    const world::ConceptWorld& world_;
};

}  // namespace mimmu::diff
