#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mimmu::world {

// Conditioning token: either attribute index may be absent (the null token).
struct ConceptPrompt {
    std::optional<int> a;
    std::optional<int> b;

    static ConceptPrompt null() { return {}; }
    static ConceptPrompt only_a(int a) { return {a, std::nullopt}; }
    static ConceptPrompt only_b(int b) { return {std::nullopt, b}; }
    static ConceptPrompt both(int a, int b) { return {a, b}; }
    bool is_null() const { return !a && !b; }
};

struct MixtureComponent {
    std::vector<double> mean;
    std::vector<double> cov;  // row-major d x d, symmetric positive-definite
    double weight = 0.0;
    int label_a = 0;
    int label_b = 0;
};

struct LabeledSample {
    std::vector<double> x;
    int label_a = 0;
    int label_b = 0;
};

// Two-attribute Gaussian-mixture data distribution with analytic
// densities, Bayes classifier, optimal denoisers and ground-truth
// mutual information. Immutable after construction.
class ConceptWorld {
   public:
    ConceptWorld(std::size_t d, int n_a, int n_b,
                 std::vector<MixtureComponent> components);

    std::size_t dim() const { return d_; }
    int n_a() const { return n_a_; }
    int n_b() const { return n_b_; }
    const std::vector<MixtureComponent>& components() const {
        return components_;
    }

    // Indices of components matching the prompt's non-null attributes.
    // Throws when the prompt matches no component.
    std::vector<std::size_t> matching(const ConceptPrompt& prompt) const;

    // Draws from the prompt-restricted renormalized mixture.
    std::vector<LabeledSample> sample(const ConceptPrompt& prompt,
                                      std::size_t n, std::uint64_t seed) const;

    // Exact log of the (prompt-restricted, renormalized) density at x, nats.
    double log_density(const std::vector<double>& x,
                       const ConceptPrompt& prompt) const;

    // Exact posterior p(label | x), row-major (n_a x n_b), sums to 1.
    std::vector<double> bayes_posterior(const std::vector<double>& x) const;

    // Label with the largest posterior.
    std::pair<int, int> bayes_argmax(const std::vector<double>& x) const;

    // MMSE-optimal noise estimate for x_noisy = sqrt(abar) x + sqrt(1-abar) e
    // with x drawn from the prompt-restricted mixture. 0 < abar < 1.
    std::vector<double> analytic_denoiser(const std::vector<double>& x_noisy,
                                          double abar,
                                          const ConceptPrompt& prompt) const;

   private:
    std::size_t d_;
    int n_a_;
    int n_b_;
    std::vector<MixtureComponent> components_;
    std::vector<std::vector<double>> chol_;     // per-component Cholesky of cov
    std::vector<double> log_norm_;              // per-component log normalizer
};

enum class Attribute { A, B };

struct MiEstimate {
    double value = 0.0;  // nats
    double std_error = 0.0;
    std::size_t n_mc = 0;
};

// Grid world: component means on a regular grid, coordinate 0 indexed by
// attribute A, coordinate 1 by B, equal weights, isotropic covariance.
ConceptWorld build_grid_world(int n_a, int n_b, std::size_t d, double spacing,
                              double sigma, std::uint64_t seed = 0);

// Default 4x5 world: Bayes accuracy of the true distribution > 99.9%, so
// downstream metric noise is attributable to models, not the oracle.
ConceptWorld default_world();

// Two A-values at 1.5 sigma spacing for neighborhood-retention probes.
ConceptWorld fine_grained_world();

// Monte Carlo ground-truth I(x; attribute) using exact log densities.
MiEstimate analytic_mi(const ConceptWorld& world, Attribute axis,
                       std::size_t n_mc, std::uint64_t seed);

// Versioned JSON round trip; floats carry 17 significant digits and the
// field order is fixed.
std::string world_to_json(const ConceptWorld& world);
ConceptWorld world_from_json(const std::string& json_text);

}  // namespace mimmu::world
