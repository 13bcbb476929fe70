#pragma once

#include <cstdint>
#include <vector>

#include "mimmu/diffusion/predictor.hpp"
#include "mimmu/diffusion/schedule.hpp"
#include "mimmu/numerics/param_vector.hpp"
#include "mimmu/numerics/tape.hpp"
#include "mimmu/world/world.hpp"

namespace mimmu::diff {

struct Architecture {
    std::size_t dim = 2;
    std::vector<std::size_t> hidden = {128, 128, 128};
    std::size_t time_embed_dim = 32;   // even; sinusoidal features of log-SNR
    std::size_t attr_embed_dim = 16;   // learned, incl. one null token per axis
    int n_a = 4;
    int n_b = 5;

    std::size_t input_dim() const {
        return dim + time_embed_dim + 2 * attr_embed_dim;
    }

    // Small configuration for Jacobian-path verification runs.
    static Architecture tiny(int n_a, int n_b, std::size_t dim = 2) {
        Architecture a;
        a.dim = dim;
        a.hidden = {16, 16};
        a.time_embed_dim = 8;
        a.attr_embed_dim = 4;
        a.n_a = n_a;
        a.n_b = n_b;
        return a;
    }

    bool operator==(const Architecture&) const = default;
};

// Sinusoidal features of the log-SNR; frequencies geometric in
// [0.05, 4], interleaved sin/cos. Deterministic and shared between the
// fast and taped forward paths.
void time_embedding(double alpha, std::size_t k, double* out);

// Conditional noise predictor: SiLU MLP over
// [x, time_embed(alpha), emb_a, emb_b]. Null attributes use dedicated
// learned null-token rows (index n_a resp. n_b in the tables). SiLU is
// asymptotically linear, so sampling chains that leave the data region
// still see a restoring noise estimate instead of a saturated one.
class DenoiserModel : public NoisePredictor {
   public:
    DenoiserModel(Architecture arch, std::uint64_t seed);
    DenoiserModel(Architecture arch, num::ParamVector params);

    const Architecture& arch() const { return arch_; }
    num::ParamVector& params() { return params_; }
    const num::ParamVector& params() const { return params_; }

    std::size_t dim() const override { return arch_.dim; }

    std::vector<double> predict(const std::vector<double>& x_alpha,
                                double alpha,
                                const world::ConceptPrompt& prompt)
        const override;

    std::vector<double> predict_batch(
        const std::vector<double>& x_alpha, const std::vector<double>& alphas,
        const std::vector<world::ConceptPrompt>& prompts) const override;

    // Taped forward for training and gradient verification. x_node is a
    // (batch x dim) node; params_node is the flat parameter leaf (may be
    // constant for a frozen network, through which gradients then flow
    // only via x_node). Returns the (batch x dim) prediction node.
    num::GradientTape::VarId forward_on_tape(
        num::GradientTape& tape, num::GradientTape::VarId params_node,
        num::GradientTape::VarId x_node, const std::vector<double>& alphas,
        const std::vector<world::ConceptPrompt>& prompts) const;

   private:
    void build_layout();
    void validate_prompt(const world::ConceptPrompt& prompt) const;
    std::size_t null_a() const { return static_cast<std::size_t>(arch_.n_a); }
    std::size_t null_b() const { return static_cast<std::size_t>(arch_.n_b); }

    Architecture arch_;
    num::ParamVector params_;
};

// Convenience: evaluate at a discrete schedule timestep.
std::vector<double> predict_noise(const DenoiserModel& model,
                                  const std::vector<double>& x_t,
                                  std::size_t t, const NoiseSchedule& schedule,
                                  const world::ConceptPrompt& prompt);

// gamma * eps(x|c) + (1 - gamma) * eps(x); prompt must not be fully null.
std::vector<double> cfg_prediction(const NoisePredictor& model,
                                   const std::vector<double>& x_alpha,
                                   double alpha,
                                   const world::ConceptPrompt& prompt,
                                   double gamma);

}  // namespace mimmu::diff
