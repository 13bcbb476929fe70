#include "mimmu/diffusion/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mimmu/numerics/optimizer.hpp"
#include "mimmu/numerics/rng.hpp"
#include "mimmu/numerics/tape.hpp"

namespace mimmu::diff {

std::vector<double> pretrain(DenoiserModel& model,
                             const world::ConceptWorld& world,
                             const NoiseSchedule& schedule,
                             const TrainConfig& config) {
    if (config.dropout_a < 0.0 || config.dropout_a > 1.0 ||
        config.dropout_b < 0.0 || config.dropout_b > 1.0)
        throw std::invalid_argument("pretrain: dropout outside [0, 1]");
    if (config.batch_size < 1) throw std::invalid_argument("pretrain: batch");
    const std::size_t d = model.arch().dim;
    const std::size_t T = schedule.T();
    const std::size_t B = config.batch_size;

    auto opt = num::OptimizerState::adam_state(config.learning_rate,
                                               model.params().size());
    std::vector<double> curve;
    curve.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t step = 0; step < config.batches_per_epoch; ++step) {
            num::Rng rng(
                num::derive_seed(config.seed, {0x7261, epoch, step}));
            auto batch =
                world.sample(world::ConceptPrompt::null(), B,
                             num::derive_seed(config.seed, {0x7262, epoch,
                                                            step}));
            num::Tensor xt({B, d});
            num::Tensor eps({B, d});
            std::vector<double> alphas(B);
            std::vector<world::ConceptPrompt> prompts(B);
            for (std::size_t i = 0; i < B; ++i) {
                std::size_t t = 1 + rng.uniform_index(T);
                alphas[i] = schedule.logsnr(t);
                double sa = std::sqrt(schedule.abar(t));
                double sb = std::sqrt(1.0 - schedule.abar(t));
                for (std::size_t j = 0; j < d; ++j) {
                    double e = rng.normal();
                    eps.data[i * d + j] = e;
                    xt.data[i * d + j] = sa * batch[i].x[j] + sb * e;
                }
                world::ConceptPrompt p =
                    world::ConceptPrompt::both(batch[i].label_a,
                                               batch[i].label_b);
                if (rng.uniform() < config.dropout_a) p.a.reset();
                if (rng.uniform() < config.dropout_b) p.b.reset();
                prompts[i] = p;
            }

            num::GradientTape tape;
            auto params_node = tape.param(model.params());
            auto x_node = tape.constant(std::move(xt));
            auto pred =
                model.forward_on_tape(tape, params_node, x_node, alphas,
                                      prompts);
            auto target = tape.constant(std::move(eps));
            auto loss = tape.scale(tape.sum_sq(tape.sub(pred, target)),
                                   1.0 / static_cast<double>(B));
            double loss_val = tape.value(loss).data[0];
            if (!std::isfinite(loss_val))
                throw std::runtime_error(
                    "pretrain: non-finite loss at epoch " +
                    std::to_string(epoch) + " step " + std::to_string(step));
            tape.backward(loss);
            num::optimizer_step(model.params(), tape.grad(params_node).data,
                                opt);
            epoch_loss += loss_val;
        }
        curve.push_back(epoch_loss /
                        static_cast<double>(config.batches_per_epoch));
    }
    return curve;
}

double oracle_gap(const NoisePredictor& model, const world::ConceptWorld& world,
                  const NoiseSchedule& schedule, std::size_t n_t,
                  std::size_t n_per_t, std::uint64_t seed) {
    if (n_t < 1 || n_per_t < 1) throw std::invalid_argument("oracle_gap: n");
    const std::size_t d = world.dim();
    const std::size_t T = schedule.T();
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < n_t; ++k) {
        // interior t grid; extreme ends carry little training signal
        std::size_t t = 1 + (k * (T - 1)) / (n_t > 1 ? n_t - 1 : 1);
        num::Rng rng(num::derive_seed(seed, {0x6761, k}));
        auto pts = world.sample(world::ConceptPrompt::null(), n_per_t,
                                num::derive_seed(seed, {0x6762, k}));
        double sa = std::sqrt(schedule.abar(t));
        double sb = std::sqrt(1.0 - schedule.abar(t));
        for (const auto& s : pts) {
            std::vector<double> xt(d);
            for (std::size_t j = 0; j < d; ++j)
                xt[j] = sa * s.x[j] + sb * rng.normal();
            auto prompt = world::ConceptPrompt::null();
            auto pred = model.predict(xt, schedule.logsnr(t), prompt);
            auto star = world.analytic_denoiser(xt, schedule.abar(t), prompt);
            for (std::size_t j = 0; j < d; ++j) {
                double dd = pred[j] - star[j];
                acc += dd * dd;
            }
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace mimmu::diff
