#include <doctest.h>

#include <cmath>

#include "mimmu/infotheory/estimators.hpp"
#include "mimmu/numerics/rng.hpp"

using namespace mimmu;
using namespace mimmu::info;

namespace {

world::ConceptWorld standard_normal_world() {
    world::MixtureComponent c;
    c.mean = {0.0, 0.0};
    c.cov = {1.0, 0.0, 0.0, 1.0};
    c.weight = 1.0;
    return world::ConceptWorld(2, 1, 1, {c});
}

world::ConceptWorld two_class_world(double gap) {
    world::MixtureComponent l, r;
    l.mean = {-gap / 2, 0.0};
    r.mean = {gap / 2, 0.0};
    l.cov = r.cov = {0.25, 0.0, 0.0, 0.25};
    l.weight = r.weight = 0.5;
    l.label_a = 0;
    r.label_a = 1;
    return world::ConceptWorld(2, 2, 1, {l, r});
}

struct ZeroPredictor : diff::NoisePredictor {
    std::size_t dim() const override { return 2; }
    std::vector<double> predict(const std::vector<double>&, double,
                                const world::ConceptPrompt&) const override {
        return {0.0, 0.0};
    }
};

// oracle with a constant bias, breaks the orthogonality of the optimum
struct BiasedOracle : diff::NoisePredictor {
    explicit BiasedOracle(const world::ConceptWorld& w) : oracle(w) {}
    std::size_t dim() const override { return oracle.dim(); }
    std::vector<double> predict(const std::vector<double>& x, double a,
                                const world::ConceptPrompt& p) const override {
        auto e = oracle.predict(x, a, p);
        if (!p.is_null())
            for (auto& v : e) v += 0.5;
        return e;
    }
    diff::OracleDenoiser oracle;
};

}  // namespace

TEST_CASE("uniform grid: trapezoid weights over the span, validation") {
    auto g = LogSnrGrid::uniform(64, -10.0, 10.0);
    REQUIRE(g.nodes.size() == 64);
    double total = 0.0;
    for (double w : g.weights) total += w;
    CHECK(total == doctest::Approx(20.0));
    CHECK(g.nodes.front() == 10.0);
    CHECK(g.nodes.back() == -10.0);
    g.validate();
    CHECK_THROWS(LogSnrGrid::uniform(8));
    auto bad = g;
    bad.nodes[3] = bad.nodes[2];
    CHECK_THROWS(bad.validate());
}

TEST_CASE("gaussian_reference_mmse closed form") {
    CHECK(gaussian_reference_mmse({0.0, 0.0}, 0.0) ==
          doctest::Approx(0.25 * 2.0));
    // low SNR limit: abar * d
    double abar = diff::sigmoid(-12.0);
    CHECK(gaussian_reference_mmse({0.0, 0.0}, -12.0) ==
          doctest::Approx(abar * abar * 2.0));
    CHECK(gaussian_reference_mmse({3.0, 4.0}, 0.0) ==
          doctest::Approx(0.5 * (0.5 * 2.0 + 0.5 * 25.0)));
}

TEST_CASE("mmse_point matches the Gaussian closed form on the oracle") {
    auto w = standard_normal_world();
    diff::OracleDenoiser oracle(w);
    num::Rng rng(3);
    for (double alpha : {-4.0, -1.0, 0.0, 1.0, 3.0}) {
        std::vector<double> x = {rng.normal(), rng.normal()};
        double est = mmse_point(oracle, x, alpha, world::ConceptPrompt::null(),
                                4000, 17);
        double ref = gaussian_reference_mmse(x, alpha);
        CHECK(est == doctest::Approx(ref).epsilon(0.08));
    }
}

TEST_CASE("zero predictor yields E|eps|^2 = d") {
    ZeroPredictor z;
    double est =
        mmse_point(z, {0.3, -0.8}, 0.5, world::ConceptPrompt::null(), 5000, 7);
    CHECK(est == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("mmse rises with alpha toward d for the Gaussian world") {
    // the cleaner the input, the smaller the noise imprint left to read
    auto w = standard_normal_world();
    diff::OracleDenoiser oracle(w);
    std::vector<double> x = {0.5, -0.2};
    double prev = -1.0;
    for (double alpha : {-6.0, -3.0, 0.0, 3.0, 6.0}) {
        double m = mmse_point(oracle, x, alpha, world::ConceptPrompt::null(),
                              2000, 5);
        CHECK(m > prev);
        prev = m;
    }
    double low =
        mmse_point(oracle, x, -8.0, world::ConceptPrompt::null(), 2000, 5);
    CHECK(low < 0.01);
    double high =
        mmse_point(oracle, x, 8.0, world::ConceptPrompt::null(), 2000, 5);
    CHECK(high == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("oracle density estimate matches the exact log density") {
    auto w = world::default_world();
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform();
    auto pts = w.sample(world::ConceptPrompt::null(), 10, 41);
    double err = 0.0, band = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto est = neg_log_density(oracle, pts[i].x,
                                   world::ConceptPrompt::null(), grid, 64,
                                   num::derive_seed(9, {i}));
        CHECK(est.value ==
              doctest::Approx(est.gaussian_reference_term +
                              est.correction_integral));
        err += std::abs(est.value +
                        w.log_density(pts[i].x, world::ConceptPrompt::null()));
        band += est.std_error;
    }
    CHECK(err / 10.0 < 0.05 + 3.0 * band / 10.0);
}

TEST_CASE("conditional density via a conditional prompt") {
    auto w = two_class_world(10.0);
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform();
    auto pts = w.sample(world::ConceptPrompt::only_a(0), 5, 13);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto est = neg_log_density(oracle, pts[i].x,
                                   world::ConceptPrompt::only_a(0), grid, 48,
                                   num::derive_seed(3, {i}));
        double truth =
            -w.log_density(pts[i].x, world::ConceptPrompt::only_a(0));
        CHECK(est.value == doctest::Approx(truth).epsilon(0.1));
    }
}

TEST_CASE("standard normal world has a vanishing correction integral") {
    auto w = standard_normal_world();
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform();
    auto est = neg_log_density(oracle, {0.4, -1.1},
                               world::ConceptPrompt::null(), grid, 64, 21);
    CHECK(std::abs(est.correction_integral) < 0.05);
}

TEST_CASE("doubling the grid barely moves the density estimate") {
    auto w = world::default_world();
    diff::OracleDenoiser oracle(w);
    auto pts = w.sample(world::ConceptPrompt::null(), 3, 55);
    for (const auto& p : pts) {
        auto a = neg_log_density(oracle, p.x, world::ConceptPrompt::null(),
                                 LogSnrGrid::uniform(64), 64, 8);
        auto b = neg_log_density(oracle, p.x, world::ConceptPrompt::null(),
                                 LogSnrGrid::uniform(128), 64, 8);
        CHECK(std::abs(a.value - b.value) <
              3.0 * (a.std_error + b.std_error) + 0.02);
    }
}

TEST_CASE("naive minus nonneg equals the shared-draw cross term") {
    auto w = two_class_world(6.0);
    BiasedOracle model(w);  // suboptimal, so the gap is nonzero
    auto grid = LogSnrGrid::uniform(32);
    num::Rng rng(2);
    for (int c = 0; c < 20; ++c) {
        std::vector<double> x = {3.0 * rng.normal(), 3.0 * rng.normal()};
        auto prompt = world::ConceptPrompt::only_a(c % 2);
        std::uint64_t seed = num::derive_seed(100, {(std::uint64_t)c});
        auto naive = mi_naive(model, x, prompt, grid, 16, seed);
        auto nonneg = mi_nonneg(model, x, prompt, grid, 16, seed);
        double cross = cross_term_integral(model, x, prompt, grid, 16, seed);
        CHECK(std::abs(naive.value - nonneg.value - cross) < 1e-10);
        CHECK(nonneg.value >= 0.0);
    }
}

TEST_CASE("mi estimators reject null prompts") {
    auto w = two_class_world(6.0);
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform(16);
    CHECK_THROWS(mi_naive(oracle, {0.0, 0.0}, world::ConceptPrompt::null(),
                          grid, 4, 0));
    CHECK_THROWS(mi_nonneg(oracle, {0.0, 0.0}, world::ConceptPrompt::null(),
                           grid, 4, 0));
}

TEST_CASE("y-independent model gives exactly zero nonneg MI") {
    auto w = standard_normal_world();  // one class: prompt adds nothing
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform(16);
    auto e = mi_nonneg(oracle, {0.7, 0.7}, world::ConceptPrompt::only_a(0),
                       grid, 16, 4);
    CHECK(e.value == 0.0);
    auto n = mi_naive(oracle, {0.7, 0.7}, world::ConceptPrompt::only_a(0),
                      grid, 16, 4);
    CHECK(n.value == 0.0);
}

TEST_CASE("batch nonneg MI on the oracle recovers the analytic MI") {
    auto w = two_class_world(30.0);
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform();
    double est = 0.0, se2 = 0.0;
    for (int a = 0; a < 2; ++a) {
        auto pts = w.sample(world::ConceptPrompt::only_a(a), 30, 60 + a);
        std::vector<std::vector<double>> xs;
        for (auto& p : pts) xs.push_back(p.x);
        auto e = mi_nonneg_batch(oracle, xs, world::ConceptPrompt::only_a(a),
                                 grid, 32, 71 + a);
        est += 0.5 * e.value;
        se2 += 0.25 * e.std_error * e.std_error;
    }
    auto truth = analytic_mi(w, world::Attribute::A, 20000, 8);
    CHECK(std::abs(est - truth.value) <
          0.05 + 3.0 * std::sqrt(se2 + truth.std_error * truth.std_error));
}

TEST_CASE("nonneg estimator has lower spread than naive across seeds") {
    auto w = two_class_world(6.0);
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform(32);
    std::vector<double> x = {3.0, 0.1};
    auto prompt = world::ConceptPrompt::only_a(1);
    double sn = 0, sn2 = 0, sp = 0, sp2 = 0;
    const int reps = 24;
    for (int r = 0; r < reps; ++r) {
        std::uint64_t seed = num::derive_seed(900, {(std::uint64_t)r});
        double a = mi_naive(oracle, x, prompt, grid, 8, seed).value;
        double b = mi_nonneg(oracle, x, prompt, grid, 8, seed).value;
        sn += a;
        sn2 += a * a;
        sp += b;
        sp2 += b * b;
    }
    double var_naive = sn2 / reps - (sn / reps) * (sn / reps);
    double var_nonneg = sp2 / reps - (sp / reps) * (sp / reps);
    CHECK(var_nonneg < var_naive);
}

TEST_CASE("orthogonality residual vanishes for the oracle, not for a biased model") {
    auto w = two_class_world(6.0);
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform(16);
    auto curve = orthogonality_residual(oracle, w,
                                        world::ConceptPrompt::only_a(0), grid,
                                        24, 24, 19);
    for (std::size_t i = 0; i < curve.value.size(); ++i)
        CHECK(std::abs(curve.value[i]) <
              3.0 * curve.std_error[i] + 1e-3);

    BiasedOracle biased(w);
    auto bad = orthogonality_residual(biased, w,
                                      world::ConceptPrompt::only_a(0), grid,
                                      24, 24, 19);
    // bias of +0.5 on the conditional branch leaves a visible cross term
    bool significant = false;
    for (std::size_t i = 0; i < bad.value.size(); ++i)
        if (std::abs(bad.value[i]) > 5.0 * (bad.std_error[i] + 1e-6))
            significant = true;
    CHECK(significant);
}

TEST_CASE("mi_at_timestep basics and consistency with the integral") {
    auto w = two_class_world(12.0);
    diff::OracleDenoiser oracle(w);
    auto s = diff::NoiseSchedule::cosine(200);
    std::vector<double> x = {6.0, 0.0};
    CHECK(mi_at_timestep(oracle, x, 50, s, world::ConceptPrompt::null(), 8,
                         3) == 0.0);
    CHECK_THROWS(
        mi_at_timestep(oracle, x, 0, s, world::ConceptPrompt::null(), 8, 3));

    // discrete-time integral with the t -> alpha change of variables
    double acc = 0.0;
    for (std::size_t t = 1; t <= 200; ++t) {
        double lo = t < 200 ? s.logsnr(t + 1) : s.logsnr(t);
        double hi = t > 1 ? s.logsnr(t - 1) : s.logsnr(t);
        double w_t = 0.5 * (hi - lo);
        acc += w_t * mi_at_timestep(oracle, x, t, s,
                                    world::ConceptPrompt::only_a(1), 16,
                                    num::derive_seed(5, {t}));
    }
    auto ref = mi_nonneg(oracle, x, world::ConceptPrompt::only_a(1),
                         LogSnrGrid::uniform(128, -12.0, 12.0), 64, 6);
    CHECK(acc == doctest::Approx(ref.value).epsilon(0.1));
}

TEST_CASE("report lines carry the estimator fields") {
    auto w = two_class_world(6.0);
    diff::OracleDenoiser oracle(w);
    auto grid = LogSnrGrid::uniform(16);
    auto e = mi_nonneg(oracle, {3.0, 0.0}, world::ConceptPrompt::only_a(1),
                       grid, 8, 12);
    auto line = report_line(e, grid);
    CHECK(line.find("\"kind\":\"mi_nonneg\"") != std::string::npos);
    CHECK(line.find("\"n_eps\":8") != std::string::npos);
    CHECK(line.find("\"seed\":12") != std::string::npos);
    CHECK(line.find(grid.id()) != std::string::npos);
    CHECK(line == report_line(e, grid));
}
