#include "mimmu/diffusion/sampler.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "mimmu/numerics/rng.hpp"

namespace mimmu::diff {

namespace {

int g_threads = 1;

// Runs n chains from t = T down to (stop_t + 1); returns x_{stop_t}
// row-major. stop_t == 0 is the full chain ending at x_0.
std::vector<double> run_chains(const NoisePredictor& model,
                               const NoiseSchedule& schedule,
                               const world::ConceptPrompt& prompt, double gamma,
                               std::size_t n, std::uint64_t seed,
                               std::size_t stop_t, std::size_t chain0 = 0) {
    const std::size_t d = model.dim();
    const std::size_t T = schedule.T();
    if (stop_t > T) throw std::out_of_range("run_chains: stop_t out of range");

    std::vector<num::Rng> rngs;
    rngs.reserve(n);
    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        rngs.emplace_back(num::derive_seed(seed, {0xc4a1, chain0 + i}));
        for (std::size_t j = 0; j < d; ++j) x[i * d + j] = rngs[i].normal();
    }

    const bool guided = !prompt.is_null();
    std::vector<world::ConceptPrompt> cond_prompts(n, prompt);
    std::vector<world::ConceptPrompt> null_prompts(n,
                                                   world::ConceptPrompt::null());
    std::vector<double> z(d);
    for (std::size_t t = T; t > stop_t; --t) {
        const double alpha = schedule.logsnr(t);
        std::vector<double> alphas(n, alpha);
        std::vector<double> eps_u =
            model.predict_batch(x, alphas, null_prompts);
        std::vector<double> eps;
        if (guided) {
            eps = model.predict_batch(x, alphas, cond_prompts);
            for (std::size_t i = 0; i < eps.size(); ++i)
                eps[i] = gamma * eps[i] + (1.0 - gamma) * eps_u[i];
        } else {
            eps = std::move(eps_u);
        }
        const double abar_t = schedule.abar(t);
        const double abar_p = schedule.abar(t - 1);
        const double beta = schedule.beta(t);
        const double alpha_t = abar_t / abar_p;
        const double inv_sqrt_a = 1.0 / std::sqrt(alpha_t);
        const double coef = beta / std::sqrt(1.0 - abar_t);
        const double sigma =
            t > 1 ? std::sqrt((1.0 - abar_p) / (1.0 - abar_t) * beta) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                double v = inv_sqrt_a * (x[i * d + j] - coef * eps[i * d + j]);
                if (t > 1) v += sigma * rngs[i].normal();
                if (!std::isfinite(v))
                    throw std::runtime_error(
                        "ancestral chain produced a non-finite value at t=" +
                        std::to_string(t));
                x[i * d + j] = v;
            }
        }
    }
    return x;
}

}  // namespace

void set_sampler_threads(int n) { g_threads = n < 1 ? 1 : n; }
int sampler_threads() { return g_threads; }

std::vector<std::vector<double>> sample(const NoisePredictor& model,
                                        const NoiseSchedule& schedule,
                                        const world::ConceptPrompt& prompt,
                                        double gamma, std::size_t n,
                                        std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n < 1");
    const std::size_t d = model.dim();
    std::vector<double> flat(n * d);
    const int workers = g_threads;
    if (workers <= 1 || n < 2 * static_cast<std::size_t>(workers)) {
        flat = run_chains(model, schedule, prompt, gamma, n, seed, 0);
    } else {
        // chains are seed-addressed, so any partition yields identical
        // results; workers fill disjoint row ranges
        std::vector<std::thread> pool;
        std::atomic<bool> failed{false};
        std::size_t per = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            std::size_t lo = static_cast<std::size_t>(w) * per;
            if (lo >= n) break;
            std::size_t hi = std::min(n, lo + per);
            pool.emplace_back([&, lo, hi]() {
                try {
                    auto part = run_chains(model, schedule, prompt, gamma,
                                           hi - lo, seed, 0, lo);
                    std::copy(part.begin(), part.end(),
                              flat.begin() +
                                  static_cast<std::ptrdiff_t>(lo * d));
                } catch (...) {
                    failed = true;
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failed)
            throw std::runtime_error("sample: worker chain failed");
    }
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i][j] = flat[i * d + j];
    return out;
}

std::vector<double> partial_sample(const NoisePredictor& model,
                                   const NoiseSchedule& schedule,
                                   const world::ConceptPrompt& prompt,
                                   double gamma, std::size_t stop_t,
                                   std::uint64_t seed) {
    if (stop_t < 1 || stop_t > schedule.T())
        throw std::out_of_range("partial_sample: stop_t out of range");
    return run_chains(model, schedule, prompt, gamma, 1, seed, stop_t);
}

std::vector<double> partial_sample_batch(const NoisePredictor& model,
                                         const NoiseSchedule& schedule,
                                         const world::ConceptPrompt& prompt,
                                         double gamma, std::size_t stop_t,
                                         std::size_t n, std::uint64_t seed) {
    if (stop_t < 1 || stop_t > schedule.T())
        throw std::out_of_range("partial_sample_batch: stop_t out of range");
    return run_chains(model, schedule, prompt, gamma, n, seed, stop_t);
}

std::vector<double> partial_sample_batch(
    const NoisePredictor& model, const NoiseSchedule& schedule,
    const std::vector<world::ConceptPrompt>& prompts, double gamma,
    const std::vector<std::size_t>& stop_ts, std::uint64_t seed) {
    const std::size_t n = stop_ts.size();
    if (prompts.size() != n)
        throw std::invalid_argument(
            "partial_sample_batch: prompt count mismatch");
    const std::size_t T = schedule.T();
    std::size_t min_stop = T;
    for (std::size_t s : stop_ts) {
        if (s < 1 || s > T)
            throw std::out_of_range(
                "partial_sample_batch: stop_t out of range");
        min_stop = std::min(min_stop, s);
    }
    const std::size_t d = model.dim();
    std::vector<num::Rng> rngs;
    rngs.reserve(n);
    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        rngs.emplace_back(num::derive_seed(seed, {0xc4a1, i}));
        for (std::size_t j = 0; j < d; ++j) x[i * d + j] = rngs[i].normal();
    }
    std::vector<world::ConceptPrompt> null_prompts(
        n, world::ConceptPrompt::null());
    for (std::size_t t = T; t > min_stop; --t) {
        const double alpha = schedule.logsnr(t);
        std::vector<double> alphas(n, alpha);
        auto eps_u = model.predict_batch(x, alphas, null_prompts);
        auto eps = model.predict_batch(x, alphas, prompts);
        for (std::size_t i = 0; i < n * d; ++i)
            eps[i] = gamma * eps[i] + (1.0 - gamma) * eps_u[i];
        const double abar_t = schedule.abar(t);
        const double abar_p = schedule.abar(t - 1);
        const double beta = schedule.beta(t);
        const double inv_sqrt_a = 1.0 / std::sqrt(abar_t / abar_p);
        const double coef = beta / std::sqrt(1.0 - abar_t);
        const double sigma =
            t > 1 ? std::sqrt((1.0 - abar_p) / (1.0 - abar_t) * beta) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (stop_ts[i] >= t) continue;  // chain already stopped
            for (std::size_t j = 0; j < d; ++j) {
                double v = inv_sqrt_a * (x[i * d + j] - coef * eps[i * d + j]);
                if (t > 1) v += sigma * rngs[i].normal();
                if (!std::isfinite(v))
                    throw std::runtime_error(
                        "ancestral chain produced a non-finite value at t=" +
                        std::to_string(t));
                x[i * d + j] = v;
            }
        }
    }
    return x;
}

}  // namespace mimmu::diff
