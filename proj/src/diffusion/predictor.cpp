#include "mimmu/diffusion/predictor.hpp"

#include <stdexcept>

namespace mimmu::diff {

std::vector<double> NoisePredictor::predict_batch(
    const std::vector<double>& x_alpha, const std::vector<double>& alphas,
    const std::vector<world::ConceptPrompt>& prompts) const {
    const std::size_t d = dim();
    const std::size_t n = alphas.size();
    if (x_alpha.size() != n * d || prompts.size() != n)
        throw std::invalid_argument("NoisePredictor::predict_batch: shape");
    std::vector<double> out(n * d);
    std::vector<double> row(d);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy(x_alpha.begin() + static_cast<std::ptrdiff_t>(r * d),
                  x_alpha.begin() + static_cast<std::ptrdiff_t>((r + 1) * d),
                  row.begin());
        auto pred = predict(row, alphas[r], prompts[r]);
        std::copy(pred.begin(), pred.end(),
                  out.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    return out;
}

}  // namespace mimmu::diff
