#include <doctest.h>

#include <cmath>

#include "mimmu/world/world.hpp"

using namespace mimmu::world;

namespace {

ConceptWorld standard_normal_world() {
    MixtureComponent c;
    c.mean = {0.0, 0.0};
    c.cov = {1.0, 0.0, 0.0, 1.0};
    c.weight = 1.0;
    return ConceptWorld(2, 1, 1, {c});
}

// two well-separated A-classes, single B-class
ConceptWorld two_class_world(double gap) {
    MixtureComponent l, r;
    l.mean = {-gap / 2, 0.0};
    r.mean = {gap / 2, 0.0};
    l.cov = r.cov = {0.25, 0.0, 0.0, 0.25};
    l.weight = r.weight = 0.5;
    l.label_a = 0;
    r.label_a = 1;
    return ConceptWorld(2, 2, 1, {l, r});
}

}  // namespace

TEST_CASE("grid world layout and weights") {
    auto w = default_world();
    CHECK(w.dim() == 2);
    CHECK(w.n_a() == 4);
    CHECK(w.n_b() == 5);
    CHECK(w.components().size() == 20);
    double total = 0.0;
    for (const auto& c : w.components()) {
        total += c.weight;
        CHECK(c.mean[0] == doctest::Approx(2.0 * (c.label_a - 1.5)));
        CHECK(c.mean[1] == doctest::Approx(2.0 * (c.label_b - 2.0)));
        CHECK(c.cov[0] == doctest::Approx(0.0625));
        CHECK(c.cov[3] == doctest::Approx(0.0625));
    }
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("construction rejects bad mixtures") {
    MixtureComponent c;
    c.mean = {0.0, 0.0};
    c.cov = {1.0, 0.0, 0.0, 1.0};
    c.weight = 0.5;  // weights must sum to 1
    CHECK_THROWS(ConceptWorld(2, 1, 1, {c}));
    c.weight = 1.0;
    c.cov = {1.0, 2.0, 2.0, 1.0};  // not positive definite
    CHECK_THROWS(ConceptWorld(2, 1, 1, {c}));
}

TEST_CASE("sampling respects prompt restriction and seed") {
    auto w = default_world();
    auto s1 = w.sample(ConceptPrompt::both(2, 3), 50, 11);
    auto s2 = w.sample(ConceptPrompt::both(2, 3), 50, 11);
    auto s3 = w.sample(ConceptPrompt::both(2, 3), 50, 12);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(s1[i].label_a == 2);
        CHECK(s1[i].label_b == 3);
        CHECK(s1[i].x == s2[i].x);
    }
    CHECK(s1[0].x != s3[0].x);

    auto sa = w.sample(ConceptPrompt::only_a(1), 200, 3);
    for (const auto& s : sa) CHECK(s.label_a == 1);
}

TEST_CASE("matching rejects impossible prompts") {
    auto w = default_world();
    CHECK_THROWS(w.matching(ConceptPrompt::only_a(9)));
    CHECK(w.matching(ConceptPrompt::null()).size() == 20);
    CHECK(w.matching(ConceptPrompt::only_b(2)).size() == 4);
}

TEST_CASE("log_density matches the Gaussian closed form") {
    auto w = standard_normal_world();
    // -log p(0) = (d/2) log(2 pi)
    CHECK(w.log_density({0.0, 0.0}, ConceptPrompt::null()) ==
          doctest::Approx(-std::log(2.0 * M_PI)));
    CHECK(w.log_density({1.0, 2.0}, ConceptPrompt::null()) ==
          doctest::Approx(-std::log(2.0 * M_PI) - 2.5));
}

TEST_CASE("conditional density renormalizes over the restricted mixture") {
    auto w = two_class_world(8.0);
    // conditioning on A=0 doubles the density near the left mean
    double joint = w.log_density({-4.0, 0.0}, ConceptPrompt::null());
    double cond = w.log_density({-4.0, 0.0}, ConceptPrompt::only_a(0));
    CHECK(cond - joint == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("bayes posterior sums to one and recovers labels") {
    auto w = default_world();
    auto post = w.bayes_posterior({-1.0, 0.0});
    double total = 0.0;
    for (double p : post) total += p;
    CHECK(total == doctest::Approx(1.0));
    auto [a, b] = w.bayes_argmax({-1.0, 0.0});
    CHECK(a == 1);
    CHECK(b == 2);
}

TEST_CASE("default world Bayes accuracy exceeds 0.999") {
    auto w = default_world();
    auto samples = w.sample(ConceptPrompt::null(), 4000, 77);
    int hit = 0;
    for (const auto& s : samples) {
        auto [a, b] = w.bayes_argmax(s.x);
        if (a == s.label_a && b == s.label_b) ++hit;
    }
    CHECK(static_cast<double>(hit) / 4000.0 > 0.999);
}

TEST_CASE("analytic denoiser on the standard normal world") {
    auto w = standard_normal_world();
    // optimal noise estimate is sqrt(1-abar) * x_noisy
    for (double abar : {0.1, 0.5, 0.9}) {
        std::vector<double> x = {0.7, -1.3};
        auto e = w.analytic_denoiser(x, abar, ConceptPrompt::null());
        CHECK(e[0] == doctest::Approx(std::sqrt(1.0 - abar) * x[0]));
        CHECK(e[1] == doctest::Approx(std::sqrt(1.0 - abar) * x[1]));
    }
    CHECK_THROWS(w.analytic_denoiser({0.0, 0.0}, 0.0, ConceptPrompt::null()));
    CHECK_THROWS(w.analytic_denoiser({0.0, 0.0}, 1.0, ConceptPrompt::null()));
}

TEST_CASE("analytic denoiser obeys the Tweedie relation") {
    auto w = default_world();
    const double abar = 0.6;
    const double sa = std::sqrt(abar);
    // smoothed mixture: means scaled by sqrt(abar), cov abar*S + (1-abar)I
    std::vector<MixtureComponent> comps = w.components();
    for (auto& c : comps) {
        for (auto& m : c.mean) m *= sa;
        for (std::size_t i = 0; i < 4; ++i) c.cov[i] *= abar;
        c.cov[0] += 1.0 - abar;
        c.cov[3] += 1.0 - abar;
    }
    ConceptWorld smoothed(2, w.n_a(), w.n_b(), comps);

    std::vector<double> x = {4.1, 7.3};
    auto e = w.analytic_denoiser(x, abar, ConceptPrompt::null());
    const double h = 1e-5;
    for (std::size_t j = 0; j < 2; ++j) {
        auto xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        double grad = (smoothed.log_density(xp, ConceptPrompt::null()) -
                       smoothed.log_density(xm, ConceptPrompt::null())) /
                      (2.0 * h);
        double expected = -std::sqrt(1.0 - abar) * grad;
        CHECK(e[j] == doctest::Approx(expected).epsilon(1e-3));
    }
}

TEST_CASE("analytic_mi hits ln(n) for far-separated equal classes") {
    auto w = two_class_world(40.0);
    auto mi = analytic_mi(w, Attribute::A, 20000, 5);
    CHECK(std::abs(mi.value - std::log(2.0)) < 3.0 * mi.std_error + 1e-3);
    auto mib = analytic_mi(w, Attribute::B, 5000, 5);
    CHECK(std::abs(mib.value) < 3.0 * mib.std_error + 1e-6);
}

TEST_CASE("analytic_mi decreases as classes overlap") {
    auto far = analytic_mi(two_class_world(20.0), Attribute::A, 8000, 9);
    auto near = analytic_mi(two_class_world(0.5), Attribute::A, 8000, 9);
    CHECK(far.value > near.value);
    CHECK(near.value >= -0.01);
}

TEST_CASE("world JSON round trip is exact and deterministic") {
    auto w = default_world();
    auto text = world_to_json(w);
    CHECK(text == world_to_json(w));
    auto back = world_from_json(text);
    CHECK(back.dim() == w.dim());
    CHECK(back.n_a() == w.n_a());
    CHECK(back.n_b() == w.n_b());
    REQUIRE(back.components().size() == w.components().size());
    for (std::size_t i = 0; i < w.components().size(); ++i) {
        CHECK(back.components()[i].mean == w.components()[i].mean);
        CHECK(back.components()[i].cov == w.components()[i].cov);
        CHECK(back.components()[i].weight == w.components()[i].weight);
        CHECK(back.components()[i].label_a == w.components()[i].label_a);
        CHECK(back.components()[i].label_b == w.components()[i].label_b);
    }
}

TEST_CASE("fine grained world has two close A-values") {
    auto w = fine_grained_world();
    CHECK(w.n_a() == 2);
    CHECK(w.components()[0].mean[0] == doctest::Approx(-0.375));
    // 1.5 sigma spacing at sigma = 0.5, centered
    bool found = false;
    for (const auto& c : w.components())
        if (c.label_a == 1 && c.label_b == 0) {
            found = true;
            CHECK(c.mean[0] == doctest::Approx(0.375));
        }
    CHECK(found);
}
