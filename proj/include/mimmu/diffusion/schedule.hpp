#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimmu::diff {

// Discrete-time variance-preserving schedule: abar_1..abar_T strictly
// decreasing, with the continuous log-SNR view used by the estimators.
class NoiseSchedule {
   public:
    static NoiseSchedule cosine(std::size_t T = 200);
    static NoiseSchedule linear_beta(std::size_t T, double beta_min = 1e-4,
                                     double beta_max = 0.02);

    std::size_t T() const { return abar_.size() - 1; }

    // 1-based timestep access; abar(0) == 1 by convention (clean data).
    double abar(std::size_t t) const {
        if (t >= abar_.size())
            throw std::out_of_range("NoiseSchedule: t out of range");
        return abar_[t];
    }
    double beta(std::size_t t) const {
        if (t < 1 || t >= abar_.size())
            throw std::out_of_range("NoiseSchedule: t out of range");
        return 1.0 - abar_[t] / abar_[t - 1];
    }
    double logsnr(std::size_t t) const {
        double a = abar(t);
        return std::log(a / (1.0 - a));
    }

    const std::string& kind() const { return kind_; }

   private:
    NoiseSchedule(std::string kind, std::vector<double> abar);
    std::string kind_;
    std::vector<double> abar_;  // index 0 holds the abar_0 = 1 convention
};

// x_t = sqrt(abar_t) x + sqrt(1 - abar_t) eps
std::vector<double> forward_noise(const std::vector<double>& x, std::size_t t,
                                  const std::vector<double>& eps,
                                  const NoiseSchedule& schedule);

}  // namespace mimmu::diff
