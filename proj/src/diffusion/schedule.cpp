#include "mimmu/diffusion/schedule.hpp"

namespace mimmu::diff {

NoiseSchedule::NoiseSchedule(std::string kind, std::vector<double> abar)
    : kind_(std::move(kind)), abar_(std::move(abar)) {
    if (abar_.size() < 2)
        throw std::invalid_argument("NoiseSchedule: need at least one step");
    if (abar_[0] != 1.0)
        throw std::invalid_argument("NoiseSchedule: abar_0 must be 1");
    for (std::size_t t = 1; t < abar_.size(); ++t) {
        if (!(abar_[t] > 0.0 && abar_[t] < 1.0))
            throw std::invalid_argument("NoiseSchedule: abar_t outside (0,1)");
        if (!(abar_[t] < abar_[t - 1]))
            throw std::invalid_argument(
                "NoiseSchedule: abar must be strictly decreasing");
    }
}

NoiseSchedule NoiseSchedule::cosine(std::size_t T) {
    // Nichol & Dhariwal cosine abar, clamped away from {0, 1}
    const double s = 0.008;
    auto f = [s](double u) {
        double c = std::cos((u + s) / (1.0 + s) * 1.5707963267948966);
        return c * c;
    };
    std::vector<double> abar(T + 1);
    abar[0] = 1.0;
    double f0 = f(0.0);
    double prev = 1.0;
    for (std::size_t t = 1; t <= T; ++t) {
        double a = f(static_cast<double>(t) / static_cast<double>(T)) / f0;
        a = std::min(a, prev * (1.0 - 1e-5));
        a = std::max(a, 1e-6);
        abar[t] = a;
        prev = a;
    }
    return NoiseSchedule("cosine", std::move(abar));
}

NoiseSchedule NoiseSchedule::linear_beta(std::size_t T, double beta_min,
                                         double beta_max) {
    std::vector<double> abar(T + 1);
    abar[0] = 1.0;
    double acc = 1.0;
    for (std::size_t t = 1; t <= T; ++t) {
        double beta = beta_min + (beta_max - beta_min) *
                                     static_cast<double>(t - 1) /
                                     static_cast<double>(T > 1 ? T - 1 : 1);
        acc *= (1.0 - beta);
        abar[t] = acc;
    }
    return NoiseSchedule("linear", std::move(abar));
}

std::vector<double> forward_noise(const std::vector<double>& x, std::size_t t,
                                  const std::vector<double>& eps,
                                  const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.T())
        throw std::out_of_range("forward_noise: t out of range");
    if (x.size() != eps.size())
        throw std::invalid_argument("forward_noise: shape mismatch");
    const double a = schedule.abar(t);
    const double sa = std::sqrt(a), s1 = std::sqrt(1.0 - a);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sa * x[i] + s1 * eps[i];
    return out;
}

}  // namespace mimmu::diff
