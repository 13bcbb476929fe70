#include "mimmu/infotheory/estimators.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mimmu/numerics/rng.hpp"
#include "mimmu/numerics/tensor.hpp"

namespace mimmu::info {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // of individual draws
};

struct NodeMoments {
    Moments naive;
    Moments nonneg;
    Moments cross;
};

Moments finish(double s, double s2, std::size_t n) {
    double mean = s / static_cast<double>(n);
    double var = n > 1 ? (s2 / static_cast<double>(n) - mean * mean) : 0.0;
    return {mean, var < 0.0 ? 0.0 : var};
}

// Shared-draw integrand moments at one noise level. One batched
// conditional and one batched unconditional prediction over the same
// noised inputs.
NodeMoments moments_at(const diff::NoisePredictor& model,
                       const std::vector<double>& x,
                       const world::ConceptPrompt& prompt, double alpha,
                       std::size_t n_eps, std::uint64_t seed) {
    if (n_eps < 1) throw std::invalid_argument("mi estimator: n_eps < 1");
    const std::size_t d = x.size();
    const double abar = diff::sigmoid(alpha);
    const double sa = std::sqrt(abar), sb = std::sqrt(1.0 - abar);
    num::Rng rng(seed);
    std::vector<double> eps(n_eps * d), xa(n_eps * d);
    for (std::size_t k = 0; k < eps.size(); ++k) {
        eps[k] = rng.normal();
        xa[k] = sa * x[k % d] + sb * eps[k];
    }
    std::vector<double> alphas(n_eps, alpha);
    std::vector<world::ConceptPrompt> cond(n_eps, prompt);
    std::vector<world::ConceptPrompt> uncond(n_eps,
                                             world::ConceptPrompt::null());
    auto eu = model.predict_batch(xa, alphas, uncond);
    auto ec = model.predict_batch(xa, alphas, cond);

    double sn = 0, sn2 = 0, sp = 0, sp2 = 0, sc = 0, sc2 = 0;
    for (std::size_t k = 0; k < n_eps; ++k) {
        double naive = 0, nonneg = 0, cross = 0;
        for (std::size_t j = 0; j < d; ++j) {
            double e = eps[k * d + j];
            double a = eu[k * d + j];
            double b = ec[k * d + j];
            double du = e - a, dc = e - b;
            naive += du * du - dc * dc;
            double g = a - b;
            nonneg += g * g;
            cross += g * (b - e);
        }
        sn += naive;
        sn2 += naive * naive;
        sp += nonneg;
        sp2 += nonneg * nonneg;
        sc += cross;
        sc2 += cross * cross;
    }
    NodeMoments out;
    out.naive = finish(sn, sn2, n_eps);
    out.nonneg = finish(sp, sp2, n_eps);
    out.cross = finish(sc, sc2, n_eps);
    return out;
}

std::vector<NodeMoments> node_moments(const diff::NoisePredictor& model,
                                      const std::vector<double>& x,
                                      const world::ConceptPrompt& prompt,
                                      const LogSnrGrid& grid,
                                      std::size_t n_eps, std::uint64_t seed) {
    grid.validate();
    std::vector<NodeMoments> out(grid.nodes.size());
    for (std::size_t i = 0; i < grid.nodes.size(); ++i)
        out[i] = moments_at(model, x, prompt, grid.nodes[i], n_eps,
                            num::derive_seed(seed, {0x6d69, i}));
    return out;
}

MIEstimate integrate(const std::vector<NodeMoments>& moms,
                     const LogSnrGrid& grid, MiKind kind, std::size_t n_eps,
                     std::uint64_t seed) {
    MIEstimate e;
    e.kind = kind;
    e.n_eps = n_eps;
    e.seed = seed;
    e.node_contrib.resize(moms.size());
    double var_acc = 0.0;
    for (std::size_t i = 0; i < moms.size(); ++i) {
        const Moments& m =
            kind == MiKind::naive ? moms[i].naive : moms[i].nonneg;
        double c = 0.5 * grid.weights[i] * m.mean;
        e.node_contrib[i] = c;
        e.value += c;
        double half_w = 0.5 * grid.weights[i];
        var_acc += half_w * half_w * m.var / static_cast<double>(n_eps);
    }
    e.std_error = std::sqrt(var_acc);
    return e;
}

void fmt_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace

LogSnrGrid LogSnrGrid::uniform(std::size_t n, double lo, double hi) {
    if (n < 16) throw std::invalid_argument("LogSnrGrid: need >= 16 nodes");
    if (!(lo < hi)) throw std::invalid_argument("LogSnrGrid: empty interval");
    LogSnrGrid g;
    g.alpha_min = lo;
    g.alpha_max = hi;
    g.nodes.resize(n);
    g.weights.resize(n);
    double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        g.nodes[i] = hi - h * static_cast<double>(i);  // high SNR first
        g.weights[i] = (i == 0 || i + 1 == n) ? h / 2.0 : h;
    }
    return g;
}

void LogSnrGrid::validate() const {
    if (nodes.size() < 16)
        throw std::invalid_argument("LogSnrGrid: need >= 16 nodes");
    if (weights.size() != nodes.size())
        throw std::invalid_argument("LogSnrGrid: weights/nodes mismatch");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (weights[i] <= 0.0)
            throw std::invalid_argument("LogSnrGrid: nonpositive weight");
        if (nodes[i] < alpha_min || nodes[i] > alpha_max)
            throw std::invalid_argument("LogSnrGrid: node outside bounds");
        if (i > 0 && nodes[i] >= nodes[i - 1])
            throw std::invalid_argument("LogSnrGrid: nodes not decreasing");
    }
}

std::string LogSnrGrid::id() const {
    std::string s = "u" + std::to_string(nodes.size()) + "[";
    fmt_double(s, alpha_min);
    s += ",";
    fmt_double(s, alpha_max);
    s += "]";
    return s;
}

double mmse_point(const diff::NoisePredictor& model,
                  const std::vector<double>& x, double alpha,
                  const world::ConceptPrompt& prompt, std::size_t n_eps,
                  std::uint64_t seed) {
    if (n_eps < 1) throw std::invalid_argument("mmse_point: n_eps < 1");
    const std::size_t d = x.size();
    const double abar = diff::sigmoid(alpha);
    const double sa = std::sqrt(abar), sb = std::sqrt(1.0 - abar);
    num::Rng rng(seed);
    std::vector<double> eps(n_eps * d), xa(n_eps * d);
    for (std::size_t k = 0; k < eps.size(); ++k) {
        eps[k] = rng.normal();
        xa[k] = sa * x[k % d] + sb * eps[k];
    }
    std::vector<double> alphas(n_eps, alpha);
    std::vector<world::ConceptPrompt> prompts(n_eps, prompt);
    auto pred = model.predict_batch(xa, alphas, prompts);
    double acc = 0.0;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        double dlt = eps[k] - pred[k];
        acc += dlt * dlt;
    }
    return acc / static_cast<double>(n_eps);
}

double gaussian_reference_mmse(const std::vector<double>& x, double alpha) {
    const double abar = diff::sigmoid(alpha);
    const double d = static_cast<double>(x.size());
    return abar * (abar * d + (1.0 - abar) * num::squared_norm(x));
}

DensityEstimate neg_log_density(const diff::NoisePredictor& model,
                                const std::vector<double>& x,
                                const world::ConceptPrompt& prompt,
                                const LogSnrGrid& grid, std::size_t n_eps,
                                std::uint64_t seed) {
    grid.validate();
    DensityEstimate e;
    e.n_eps = n_eps;
    e.seed = seed;
    const double d = static_cast<double>(x.size());
    e.gaussian_reference_term =
        0.5 * d * std::log(kTwoPi) + 0.5 * num::squared_norm(x);
    e.mmse_model.resize(grid.nodes.size());
    e.mmse_gauss.resize(grid.nodes.size());
    const std::size_t dd = x.size();
    double var_acc = 0.0;
    std::vector<world::ConceptPrompt> prompts(2 * ((n_eps + 1) / 2), prompt);
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        // both branches see the same draws; the gap then cancels the MC
        // noise that the two MMSE terms share
        const double alpha = grid.nodes[i];
        const double abar = diff::sigmoid(alpha);
        const double sa = std::sqrt(abar), sb = std::sqrt(1.0 - abar);
        num::Rng rng(num::derive_seed(seed, {0x6e6c, i}));
        // antithetic pairs (eps, -eps): cancels the x . eps cross term
        // whose variance grows with |x|^2
        const std::size_t pairs = (n_eps + 1) / 2;
        const std::size_t rows = 2 * pairs;
        std::vector<double> eps(rows * dd), xa(rows * dd);
        for (std::size_t k = 0; k < pairs; ++k)
            for (std::size_t j = 0; j < dd; ++j) {
                double e = rng.normal();
                eps[(2 * k) * dd + j] = e;
                eps[(2 * k + 1) * dd + j] = -e;
            }
        for (std::size_t k = 0; k < eps.size(); ++k)
            xa[k] = sa * x[k % dd] + sb * eps[k];
        std::vector<double> alphas(rows, alpha);
        auto pred = model.predict_batch(xa, alphas, prompts);
        double m = 0.0, g = 0.0, gap_s = 0.0, gap_s2 = 0.0;
        for (std::size_t p = 0; p < pairs; ++p) {
            double pair_gap = 0.0;
            for (std::size_t r = 2 * p; r < 2 * p + 2; ++r) {
                double dm2 = 0.0, dg2 = 0.0;
                for (std::size_t j = 0; j < dd; ++j) {
                    std::size_t k = r * dd + j;
                    double dm = eps[k] - pred[k];
                    double dg = eps[k] - sb * xa[k];  // Gaussian-optimal
                    dm2 += dm * dm;
                    dg2 += dg * dg;
                }
                m += dm2;
                g += dg2;
                pair_gap += 0.5 * (dg2 - dm2);
            }
            gap_s += pair_gap;
            gap_s2 += pair_gap * pair_gap;
        }
        m /= static_cast<double>(rows);
        g /= static_cast<double>(rows);
        e.mmse_model[i] = m;
        e.mmse_gauss[i] = g;
        e.correction_integral -= 0.5 * grid.weights[i] * (g - m);
        // pair means are the independent MC samples
        double gm = gap_s / static_cast<double>(pairs);
        double gv = gap_s2 / static_cast<double>(pairs) - gm * gm;
        if (gv < 0.0) gv = 0.0;
        double hw = 0.5 * grid.weights[i];
        var_acc += hw * hw * gv / static_cast<double>(pairs);
    }
    e.value = e.gaussian_reference_term + e.correction_integral;
    e.std_error = std::sqrt(var_acc);
    return e;
}

MIEstimate mi_naive(const diff::NoisePredictor& model,
                    const std::vector<double>& x,
                    const world::ConceptPrompt& prompt, const LogSnrGrid& grid,
                    std::size_t n_eps, std::uint64_t seed) {
    if (prompt.is_null()) throw std::invalid_argument("mi_naive: null prompt");
    auto moms = node_moments(model, x, prompt, grid, n_eps, seed);
    return integrate(moms, grid, MiKind::naive, n_eps, seed);
}

MIEstimate mi_nonneg(const diff::NoisePredictor& model,
                     const std::vector<double>& x,
                     const world::ConceptPrompt& prompt,
                     const LogSnrGrid& grid, std::size_t n_eps,
                     std::uint64_t seed) {
    if (prompt.is_null()) throw std::invalid_argument("mi_nonneg: null prompt");
    auto moms = node_moments(model, x, prompt, grid, n_eps, seed);
    return integrate(moms, grid, MiKind::nonneg, n_eps, seed);
}

double cross_term_integral(const diff::NoisePredictor& model,
                           const std::vector<double>& x,
                           const world::ConceptPrompt& prompt,
                           const LogSnrGrid& grid, std::size_t n_eps,
                           std::uint64_t seed) {
    auto moms = node_moments(model, x, prompt, grid, n_eps, seed);
    double acc = 0.0;
    for (std::size_t i = 0; i < moms.size(); ++i)
        acc += grid.weights[i] * moms[i].cross.mean;
    return acc;
}

namespace {

MIEstimate batch_mean(const diff::NoisePredictor& model,
                      const std::vector<std::vector<double>>& xs,
                      const world::ConceptPrompt& prompt,
                      const LogSnrGrid& grid, std::size_t n_eps,
                      std::uint64_t seed, MiKind kind) {
    if (xs.empty()) throw std::invalid_argument("mi batch: empty point set");
    MIEstimate out;
    out.kind = kind;
    out.n_eps = n_eps;
    out.seed = seed;
    out.node_contrib.assign(grid.nodes.size(), 0.0);
    double s = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        auto moms = node_moments(model, xs[j], prompt, grid, n_eps,
                                 num::derive_seed(seed, {0x6274, j}));
        auto e = integrate(moms, grid, kind, n_eps, seed);
        s += e.value;
        s2 += e.value * e.value;
        for (std::size_t i = 0; i < grid.nodes.size(); ++i)
            out.node_contrib[i] += e.node_contrib[i];
    }
    const double n = static_cast<double>(xs.size());
    out.value = s / n;
    for (auto& c : out.node_contrib) c /= n;
    double var = s2 / n - out.value * out.value;
    out.std_error = xs.size() > 1 ? std::sqrt((var < 0 ? 0 : var) / n) : 0.0;
    return out;
}

}  // namespace

MIEstimate mi_naive_batch(const diff::NoisePredictor& model,
                          const std::vector<std::vector<double>>& xs,
                          const world::ConceptPrompt& prompt,
                          const LogSnrGrid& grid, std::size_t n_eps,
                          std::uint64_t seed) {
    if (prompt.is_null()) throw std::invalid_argument("mi batch: null prompt");
    return batch_mean(model, xs, prompt, grid, n_eps, seed, MiKind::naive);
}

MIEstimate mi_nonneg_batch(const diff::NoisePredictor& model,
                           const std::vector<std::vector<double>>& xs,
                           const world::ConceptPrompt& prompt,
                           const LogSnrGrid& grid, std::size_t n_eps,
                           std::uint64_t seed) {
    if (prompt.is_null()) throw std::invalid_argument("mi batch: null prompt");
    return batch_mean(model, xs, prompt, grid, n_eps, seed, MiKind::nonneg);
}

ResidualCurve orthogonality_residual(const diff::NoisePredictor& model,
                                     const world::ConceptWorld& world,
                                     const world::ConceptPrompt& prompt,
                                     const LogSnrGrid& grid, std::size_t n_x,
                                     std::size_t n_eps, std::uint64_t seed) {
    grid.validate();
    if (n_x < 1 || n_eps < 1)
        throw std::invalid_argument("orthogonality_residual: n");
    auto pts = world.sample(prompt, n_x, num::derive_seed(seed, {0x6f78}));
    ResidualCurve curve;
    curve.value.assign(grid.nodes.size(), 0.0);
    curve.std_error.assign(grid.nodes.size(), 0.0);
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        double s = 0.0, s2 = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            auto m = moments_at(model, pts[j].x, prompt, grid.nodes[i], n_eps,
                                num::derive_seed(seed, {0x6f72, i, j}));
            s += m.cross.mean;
            s2 += m.cross.mean * m.cross.mean;
            ++count;
        }
        double mean = s / static_cast<double>(count);
        double var = s2 / static_cast<double>(count) - mean * mean;
        curve.value[i] = mean;
        curve.std_error[i] =
            count > 1 ? std::sqrt((var < 0 ? 0 : var) /
                                  static_cast<double>(count))
                      : 0.0;
    }
    return curve;
}

double mi_at_timestep(const diff::NoisePredictor& teacher,
                      const std::vector<double>& x, std::size_t t,
                      const diff::NoiseSchedule& schedule,
                      const world::ConceptPrompt& prompt, std::size_t n_eps,
                      std::uint64_t seed) {
    if (t < 1 || t > schedule.T())
        throw std::out_of_range("mi_at_timestep: t out of range");
    if (n_eps < 1) throw std::invalid_argument("mi_at_timestep: n_eps");
    const std::size_t d = x.size();
    const double sa = std::sqrt(schedule.abar(t));
    const double sb = std::sqrt(1.0 - schedule.abar(t));
    num::Rng rng(seed);
    std::vector<double> xt(n_eps * d);
    for (std::size_t k = 0; k < xt.size(); ++k)
        xt[k] = sa * x[k % d] + sb * rng.normal();
    std::vector<double> alphas(n_eps, schedule.logsnr(t));
    std::vector<world::ConceptPrompt> cond(n_eps, prompt);
    std::vector<world::ConceptPrompt> uncond(n_eps,
                                             world::ConceptPrompt::null());
    auto ec = teacher.predict_batch(xt, alphas, cond);
    auto eu = teacher.predict_batch(xt, alphas, uncond);
    double acc = 0.0;
    for (std::size_t k = 0; k < xt.size(); ++k) {
        double g = ec[k] - eu[k];
        acc += g * g;
    }
    return 0.5 * acc / static_cast<double>(n_eps);
}

std::string report_line(const MIEstimate& e, const LogSnrGrid& grid) {
    std::string s = "{\"kind\":\"";
    s += e.kind == MiKind::naive ? "mi_naive" : "mi_nonneg";
    s += "\",\"value\":";
    fmt_double(s, e.value);
    s += ",\"se\":";
    fmt_double(s, e.std_error);
    s += ",\"grid_id\":\"" + grid.id() + "\"";
    s += ",\"n_eps\":" + std::to_string(e.n_eps);
    s += ",\"seed\":" + std::to_string(e.seed) + "}";
    return s;
}

std::string report_line(const DensityEstimate& e, const LogSnrGrid& grid) {
    std::string s = "{\"kind\":\"neg_log_density\",\"value\":";
    fmt_double(s, e.value);
    s += ",\"se\":0,\"grid_id\":\"" + grid.id() + "\"";
    s += ",\"n_eps\":" + std::to_string(e.n_eps);
    s += ",\"seed\":" + std::to_string(e.seed) + "}";
    return s;
}

}  // namespace mimmu::info
