#include "mimmu/world/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mimmu/numerics/rng.hpp"
#include "mimmu/numerics/tensor.hpp"

namespace mimmu::world {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Lower-triangular Cholesky of a row-major d x d SPD matrix.
std::vector<double> cholesky(std::size_t d, const std::vector<double>& a) {
    std::vector<double> L(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * d + j];
            for (std::size_t k = 0; k < j; ++k) s -= L[i * d + k] * L[j * d + k];
            if (i == j) {
                if (s <= 0.0)
                    throw std::invalid_argument(
                        "cholesky: matrix not positive-definite");
                L[i * d + i] = std::sqrt(s);
            } else {
                L[i * d + j] = s / L[j * d + j];
            }
        }
    }
    return L;
}

// Solves L z = b in place (forward substitution).
void forward_solve(std::size_t d, const std::vector<double>& L,
                   std::vector<double>& b) {
    for (std::size_t i = 0; i < d; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= L[i * d + k] * b[k];
        b[i] = s / L[i * d + i];
    }
}

// Solves L^T z = b in place (back substitution).
void backward_solve(std::size_t d, const std::vector<double>& L,
                    std::vector<double>& b) {
    for (std::size_t ii = d; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < d; ++k) s -= L[k * d + ii] * b[k];
        b[ii] = s / L[ii * d + ii];
    }
}

double sum_log_diag(std::size_t d, const std::vector<double>& L) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += std::log(L[i * d + i]);
    return s;
}

}  // namespace

ConceptWorld::ConceptWorld(std::size_t d, int n_a, int n_b,
                           std::vector<MixtureComponent> components)
    : d_(d), n_a_(n_a), n_b_(n_b), components_(std::move(components)) {
    if (n_a_ < 1 || n_b_ < 1 || d_ < 1)
        throw std::invalid_argument("ConceptWorld: invalid cardinalities");
    if (components_.size() != static_cast<std::size_t>(n_a_) * n_b_)
        throw std::invalid_argument(
            "ConceptWorld: need exactly n_a*n_b components");
    std::vector<char> seen(components_.size(), 0);
    double wsum = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != d_ || c.cov.size() != d_ * d_)
            throw std::invalid_argument("ConceptWorld: component shape mismatch");
        if (c.weight <= 0.0)
            throw std::invalid_argument("ConceptWorld: nonpositive weight");
        if (c.label_a < 0 || c.label_a >= n_a_ || c.label_b < 0 ||
            c.label_b >= n_b_)
            throw std::invalid_argument("ConceptWorld: label out of range");
        std::size_t key = static_cast<std::size_t>(c.label_a) * n_b_ + c.label_b;
        if (seen[key]++)
            throw std::invalid_argument("ConceptWorld: duplicate label pair");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("ConceptWorld: weights must sum to 1");
    for (const auto& c : components_) {
        chol_.push_back(cholesky(d_, c.cov));
        log_norm_.push_back(-0.5 * static_cast<double>(d_) * kLog2Pi -
                            sum_log_diag(d_, chol_.back()));
    }
}

std::vector<std::size_t> ConceptWorld::matching(
    const ConceptPrompt& prompt) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        if (prompt.a && *prompt.a != c.label_a) continue;
        if (prompt.b && *prompt.b != c.label_b) continue;
        out.push_back(k);
    }
    if (out.empty())
        throw std::invalid_argument("ConceptWorld: prompt matches no component");
    return out;
}

std::vector<LabeledSample> ConceptWorld::sample(const ConceptPrompt& prompt,
                                                std::size_t n,
                                                std::uint64_t seed) const {
    if (n < 1) throw std::invalid_argument("ConceptWorld::sample: n < 1");
    auto idx = matching(prompt);
    double wsum = 0.0;
    for (auto k : idx) wsum += components_[k].weight;
    num::Rng rng(seed);
    std::vector<LabeledSample> out;
    out.reserve(n);
    std::vector<double> z(d_);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform() * wsum;
        std::size_t pick = idx.back();
        double acc = 0.0;
        for (auto k : idx) {
            acc += components_[k].weight;
            if (u < acc) {
                pick = k;
                break;
            }
        }
        const auto& c = components_[pick];
        const auto& L = chol_[pick];
        rng.fill_normal(z);
        LabeledSample s;
        s.x.assign(d_, 0.0);
        for (std::size_t r = 0; r < d_; ++r) {
            double v = c.mean[r];
            for (std::size_t k = 0; k <= r; ++k) v += L[r * d_ + k] * z[k];
            s.x[r] = v;
        }
        s.label_a = c.label_a;
        s.label_b = c.label_b;
        out.push_back(std::move(s));
    }
    return out;
}

double ConceptWorld::log_density(const std::vector<double>& x,
                                 const ConceptPrompt& prompt) const {
    if (x.size() != d_)
        throw std::invalid_argument("ConceptWorld::log_density: bad dimension");
    auto idx = matching(prompt);
    double wsum = 0.0;
    for (auto k : idx) wsum += components_[k].weight;
    std::vector<double> terms;
    terms.reserve(idx.size());
    std::vector<double> r(d_);
    for (auto k : idx) {
        const auto& c = components_[k];
        for (std::size_t i = 0; i < d_; ++i) r[i] = x[i] - c.mean[i];
        forward_solve(d_, chol_[k], r);
        terms.push_back(std::log(c.weight / wsum) + log_norm_[k] -
                        0.5 * num::squared_norm(r));
    }
    return num::log_sum_exp(terms);
}

std::vector<double> ConceptWorld::bayes_posterior(
    const std::vector<double>& x) const {
    std::vector<double> logp(components_.size());
    std::vector<double> r(d_);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        for (std::size_t i = 0; i < d_; ++i) r[i] = x[i] - c.mean[i];
        forward_solve(d_, chol_[k], r);
        logp[k] = std::log(c.weight) + log_norm_[k] - 0.5 * num::squared_norm(r);
    }
    double lse = num::log_sum_exp(logp);
    std::vector<double> post(static_cast<std::size_t>(n_a_) * n_b_, 0.0);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        post[static_cast<std::size_t>(c.label_a) * n_b_ + c.label_b] +=
            std::exp(logp[k] - lse);
    }
    return post;
}

std::pair<int, int> ConceptWorld::bayes_argmax(
    const std::vector<double>& x) const {
    auto post = bayes_posterior(x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < post.size(); ++i)
        if (post[i] > post[best]) best = i;
    return {static_cast<int>(best) / n_b_, static_cast<int>(best) % n_b_};
}

std::vector<double> ConceptWorld::analytic_denoiser(
    const std::vector<double>& x_noisy, double abar,
    const ConceptPrompt& prompt) const {
    if (!(abar > 0.0 && abar < 1.0))
        throw std::invalid_argument(
            "ConceptWorld::analytic_denoiser: abar must lie in (0, 1)");
    if (x_noisy.size() != d_)
        throw std::invalid_argument(
            "ConceptWorld::analytic_denoiser: bad dimension");
    auto idx = matching(prompt);
    const double sa = std::sqrt(abar);

    // Per component: x_noisy | k ~ N(sqrt(abar) mu, abar*Sigma + (1-abar) I)
    std::vector<double> loglik(idx.size());
    std::vector<std::vector<double>> post_mean(idx.size());
    std::vector<double> S(d_ * d_), r(d_), w(d_);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto& c = components_[idx[j]];
        for (std::size_t p = 0; p < d_; ++p)
            for (std::size_t q = 0; q < d_; ++q)
                S[p * d_ + q] = abar * c.cov[p * d_ + q] +
                                (p == q ? (1.0 - abar) : 0.0);
        auto Ls = cholesky(d_, S);
        for (std::size_t i = 0; i < d_; ++i) r[i] = x_noisy[i] - sa * c.mean[i];
        // w = S^{-1} r
        w = r;
        forward_solve(d_, Ls, w);
        double quad = num::squared_norm(w);
        backward_solve(d_, Ls, w);
        loglik[j] = std::log(c.weight) - 0.5 * static_cast<double>(d_) * kLog2Pi -
                    sum_log_diag(d_, Ls) - 0.5 * quad;
        // E[x | x_noisy, k] = mu + sqrt(abar) * Sigma * S^{-1} r
        post_mean[j].assign(d_, 0.0);
        for (std::size_t p = 0; p < d_; ++p) {
            double v = c.mean[p];
            for (std::size_t q = 0; q < d_; ++q)
                v += sa * c.cov[p * d_ + q] * w[q];
            post_mean[j][p] = v;
        }
    }
    double lse = num::log_sum_exp(loglik);
    std::vector<double> xhat(d_, 0.0);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        double resp = std::exp(loglik[j] - lse);
        for (std::size_t p = 0; p < d_; ++p) xhat[p] += resp * post_mean[j][p];
    }
    std::vector<double> eps_hat(d_);
    const double s1 = std::sqrt(1.0 - abar);
    for (std::size_t p = 0; p < d_; ++p)
        eps_hat[p] = (x_noisy[p] - sa * xhat[p]) / s1;
    return eps_hat;
}

ConceptWorld build_grid_world(int n_a, int n_b, std::size_t d, double spacing,
                              double sigma, std::uint64_t /*seed*/) {
    if (n_a < 2 || n_b < 2 || d < 2)
        throw std::invalid_argument("build_grid_world: need n_a,n_b >= 2, d >= 2");
    if (spacing <= 0.0 || sigma <= 0.0)
        throw std::invalid_argument("build_grid_world: spacing, sigma > 0");
    std::vector<MixtureComponent> comps;
    const double w = 1.0 / (static_cast<double>(n_a) * n_b);
    for (int a = 0; a < n_a; ++a) {
        for (int b = 0; b < n_b; ++b) {
            MixtureComponent c;
            c.mean.assign(d, 0.0);
            // grid centered at the origin; VP noising assumes data of
            // roughly unit scale
            c.mean[0] = spacing * (a - (n_a - 1) / 2.0);
            c.mean[1] = spacing * (b - (n_b - 1) / 2.0);
            c.cov.assign(d * d, 0.0);
            for (std::size_t i = 0; i < d; ++i) c.cov[i * d + i] = sigma * sigma;
            c.weight = w;
            c.label_a = a;
            c.label_b = b;
            comps.push_back(std::move(c));
        }
    }
    return ConceptWorld(d, n_a, n_b, std::move(comps));
}

ConceptWorld default_world() { return build_grid_world(4, 5, 2, 2.0, 0.25); }

ConceptWorld fine_grained_world() {
    // Two A-values at 1.5 sigma along axis 0: heavy posterior overlap
    // between neighboring styles, for NRA/ORA-style probes.
    const double sigma = 0.5;
    return build_grid_world(2, 2, 2, 1.5 * sigma, sigma);
}

MiEstimate analytic_mi(const ConceptWorld& world, Attribute axis,
                       std::size_t n_mc, std::uint64_t seed) {
    if (n_mc < 1000)
        throw std::invalid_argument("analytic_mi: n_mc must be >= 1000");
    auto samples = world.sample(ConceptPrompt::null(), n_mc, seed);
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& s : samples) {
        ConceptPrompt p = (axis == Attribute::A)
                              ? ConceptPrompt::only_a(s.label_a)
                              : ConceptPrompt::only_b(s.label_b);
        double v = world.log_density(s.x, p) -
                   world.log_density(s.x, ConceptPrompt::null());
        sum += v;
        sum_sq += v * v;
    }
    MiEstimate est;
    est.n_mc = n_mc;
    est.value = sum / static_cast<double>(n_mc);
    double var = sum_sq / static_cast<double>(n_mc) - est.value * est.value;
    est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n_mc));
    return est;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

void append_vec(std::string& out, const std::vector<double>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        append_double(out, v[i]);
    }
    out += ']';
}

}  // namespace

std::string world_to_json(const ConceptWorld& world) {
    // Field order is part of the format; floats carry 17 significant digits.
    std::string out;
    out += "{\"version\":1,\"d\":" + std::to_string(world.dim());
    out += ",\"n_a\":" + std::to_string(world.n_a());
    out += ",\"n_b\":" + std::to_string(world.n_b());
    out += ",\"components\":[";
    const auto& comps = world.components();
    for (std::size_t k = 0; k < comps.size(); ++k) {
        if (k) out += ',';
        const auto& c = comps[k];
        out += "{\"mean\":";
        append_vec(out, c.mean);
        out += ",\"cov\":";
        append_vec(out, c.cov);
        out += ",\"weight\":";
        append_double(out, c.weight);
        out += ",\"label\":[" + std::to_string(c.label_a) + ',' +
               std::to_string(c.label_b) + "]}";
    }
    out += "]}";
    return out;
}

ConceptWorld world_from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    if (j.at("version").get<int>() != 1)
        throw std::invalid_argument("world_from_json: unsupported version");
    std::size_t d = j.at("d").get<std::size_t>();
    int n_a = j.at("n_a").get<int>();
    int n_b = j.at("n_b").get<int>();
    std::vector<MixtureComponent> comps;
    for (const auto& jc : j.at("components")) {
        MixtureComponent c;
        c.mean = jc.at("mean").get<std::vector<double>>();
        c.cov = jc.at("cov").get<std::vector<double>>();
        c.weight = jc.at("weight").get<double>();
        c.label_a = jc.at("label").at(0).get<int>();
        c.label_b = jc.at("label").at(1).get<int>();
        comps.push_back(std::move(c));
    }
    return ConceptWorld(d, n_a, n_b, std::move(comps));
}

}  // namespace mimmu::world
