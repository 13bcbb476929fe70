#include <cmath>
#include <vector>

#include "doctest.h"
#include "mimmu/diffusion/model.hpp"
#include "mimmu/diffusion/schedule.hpp"
#include "mimmu/numerics/rng.hpp"
#include "mimmu/unlearn/unlearn.hpp"
#include "mimmu/world/world.hpp"

using namespace mimmu;
using diff::Architecture;
using diff::DenoiserModel;
using diff::NoiseSchedule;
using unlearn::Method;
using unlearn::MimTarget;
using unlearn::UnlearnConfig;
using world::ConceptPrompt;

namespace {

struct Batch {
    std::vector<double> x;
    std::vector<std::size_t> t;
    std::vector<double> eps;
};

Batch make_batch(const world::ConceptWorld& w, const NoiseSchedule& s,
                 std::size_t B, std::uint64_t seed) {
    Batch b;
    auto pts = w.sample(ConceptPrompt::null(), B, seed);
    num::Rng rng(num::derive_seed(seed, {1}));
    for (std::size_t i = 0; i < B; ++i) {
        b.x.insert(b.x.end(), pts[i].x.begin(), pts[i].x.end());
        b.t.push_back(1 + rng.uniform_index(s.T()));
        for (std::size_t j = 0; j < w.dim(); ++j) b.eps.push_back(rng.normal());
    }
    return b;
}

void make_label_blind(DenoiserModel& m) {
    auto& p = m.params();
    std::size_t e = m.arch().attr_embed_dim;
    for (const char* name : {"emb_a", "emb_b"}) {
        const auto& sl = p.slice(name);
        const double* null_row = p.data() + sl.offset + (sl.rows - 1) * e;
        for (std::size_t r = 0; r + 1 < sl.rows; ++r)
            for (std::size_t i = 0; i < e; ++i)
                p[sl.offset + r * e + i] = null_row[i];
    }
}

double dir_dot(const std::vector<double>& g, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * v[i];
    return s;
}

DenoiserModel nudged(const DenoiserModel& m, const std::vector<double>& v,
                     double h) {
    DenoiserModel out = m;
    for (std::size_t i = 0; i < v.size(); ++i) out.params()[i] += h * v[i];
    return out;
}

}  // namespace

TEST_CASE("forget set covers every B cell with correct labels") {
    auto w = world::default_world();
    auto fs = unlearn::build_forget_set(w, 2, 3, 9);
    CHECK(fs.samples.size() == 3 * static_cast<std::size_t>(w.n_b()));
    CHECK(*fs.target.a == 2);
    CHECK_FALSE(fs.target.b.has_value());
    std::vector<int> seen_b(w.n_b(), 0);
    for (const auto& s : fs.samples) {
        CHECK(s.label_a == 2);
        ++seen_b[s.label_b];
    }
    for (int c : seen_b) CHECK(c == 3);
    auto again = unlearn::build_forget_set(w, 2, 3, 9);
    CHECK(again.samples[0].x == fs.samples[0].x);
    CHECK_THROWS(unlearn::build_forget_set(w, 7, 3, 9));
    CHECK_THROWS(unlearn::build_forget_set(w, 0, 0, 9));
}

TEST_CASE("config validation") {
    UnlearnConfig c;
    CHECK_NOTHROW(unlearn::validate(c));
    c.retain_batch = 4;
    CHECK_THROWS(unlearn::validate(c));  // retain data outside retargeting
    c.method = Method::retarget;
    CHECK_NOTHROW(unlearn::validate(c));
    c.retain_batch = 0;
    CHECK_THROWS(unlearn::validate(c));
    c = UnlearnConfig{};
    c.anchor_a = 1;
    CHECK_THROWS(unlearn::validate(c));
    c = UnlearnConfig{};
    c.batch_size = 0;
    CHECK_THROWS(unlearn::validate(c));
    c = UnlearnConfig{};
    c.ema_decay = 1.0;
    CHECK_THROWS(unlearn::validate(c));
}

TEST_CASE("erasure loss gradient matches finite differences") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 3);
    auto b = make_batch(w, s, 4, 5);
    auto y = ConceptPrompt::only_a(1);

    for (auto tgt : {MimTarget::teacher_uncond, MimTarget::gaussian,
                     MimTarget::zero}) {
        auto lg = unlearn::mim_mu_loss(teacher, teacher, b.x, b.t, b.eps, s, y,
                                       tgt);
        CHECK(lg.grad.size() == teacher.params().size());
        num::Rng rng(11);
        auto v = rng.normal_vec(lg.grad.size());
        double h = 1e-6;
        auto up = unlearn::mim_mu_loss(nudged(teacher, v, h), teacher, b.x, b.t,
                                       b.eps, s, y, tgt);
        auto dn = unlearn::mim_mu_loss(nudged(teacher, v, -h), teacher, b.x,
                                       b.t, b.eps, s, y, tgt);
        double fd = (up.value - dn.value) / (2 * h);
        CHECK(fd == doctest::Approx(dir_dot(lg.grad, v)).epsilon(1e-6));
    }
}

TEST_CASE("analytic gradient coincides with the taped loss gradient") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 21);
    DenoiserModel student(Architecture::tiny(w.n_a(), w.n_b()), 22);
    auto b = make_batch(w, s, 6, 8);
    auto y = ConceptPrompt::only_a(0);

    auto lg = unlearn::mim_mu_loss(student, teacher, b.x, b.t, b.eps, s, y);
    auto g = unlearn::mim_mu_analytic_gradient(student, teacher, b.x, b.t,
                                               b.eps, s, y);
    REQUIRE(g.size() == lg.grad.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(g[i] == doctest::Approx(lg.grad[i]).epsilon(1e-10));
}

TEST_CASE("erasure loss rejects a null prompt") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel m(Architecture::tiny(w.n_a(), w.n_b()), 1);
    auto b = make_batch(w, s, 2, 2);
    CHECK_THROWS(unlearn::mim_mu_loss(m, m, b.x, b.t, b.eps, s,
                                      ConceptPrompt::null()));
}

TEST_CASE("self-distillation loss is deterministic and nonnegative") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel m(Architecture::tiny(w.n_a(), w.n_b()), 4);
    std::vector<std::size_t> t = {3, 10, 17};
    auto a = unlearn::sdd_loss(m, m, s, t, ConceptPrompt::only_a(1), 2.0, 7);
    auto b = unlearn::sdd_loss(m, m, s, t, ConceptPrompt::only_a(1), 2.0, 7);
    CHECK(a.value == b.value);
    CHECK(a.grad == b.grad);
    CHECK(a.value >= 0.0);
    CHECK(a.value > 0.0);  // random embeddings separate the branches
}

TEST_CASE("label-blind student makes self-distillation vanish") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel m(Architecture::tiny(w.n_a(), w.n_b()), 4);
    make_label_blind(m);
    std::vector<std::size_t> t = {5, 12};
    auto lg = unlearn::sdd_loss(m, m, s, t, ConceptPrompt::only_a(2), 2.0, 7);
    CHECK(lg.value == 0.0);
    for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("retargeting loss equals the sum of its two terms") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 31);
    DenoiserModel student(Architecture::tiny(w.n_a(), w.n_b()), 32);
    auto fb = make_batch(w, s, 3, 41);
    auto retain = w.sample(ConceptPrompt::both(1, 2), 2, 42);
    std::vector<std::size_t> rt = {4, 15};
    num::Rng rng(43);
    auto reps = rng.normal_vec(2 * w.dim());
    auto y = ConceptPrompt::only_a(0);
    auto anchor = ConceptPrompt::only_a(3);

    auto lg = unlearn::retarget_loss(student, teacher, fb.x, fb.t, fb.eps,
                                     retain, rt, reps, s, y, anchor);

    double manual = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        auto xt = diff::forward_noise(
            {fb.x[2 * i], fb.x[2 * i + 1]}, fb.t[i],
            {fb.eps[2 * i], fb.eps[2 * i + 1]}, s);
        auto p = student.predict(xt, s.logsnr(fb.t[i]), y);
        auto q = teacher.predict(xt, s.logsnr(fb.t[i]), anchor);
        manual += num::squared_distance(p, q) / 3.0;
    }
    for (std::size_t i = 0; i < 2; ++i) {
        auto xt = diff::forward_noise(retain[i].x, rt[i],
                                      {reps[2 * i], reps[2 * i + 1]}, s);
        auto rp = ConceptPrompt::both(retain[i].label_a, retain[i].label_b);
        auto p = student.predict(xt, s.logsnr(rt[i]), rp);
        auto q = teacher.predict(xt, s.logsnr(rt[i]), rp);
        manual += num::squared_distance(p, q) / 2.0;
    }
    CHECK(lg.value == doctest::Approx(manual).epsilon(1e-12));
    CHECK_THROWS(unlearn::retarget_loss(student, teacher, fb.x, fb.t, fb.eps,
                                        {}, {}, {}, s, y, anchor));
}

TEST_CASE("exact MI gradient matches finite differences of the scalar") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 51);
    DenoiserModel student(Architecture::tiny(w.n_a(), w.n_b()), 52);
    std::vector<double> x_tilde = {0.4, -0.9};
    auto y = ConceptPrompt::only_a(1);
    std::size_t t = 8, n_eps = 4;
    std::uint64_t seed = 6;

    auto g = unlearn::full_mi_gradient(student, teacher, x_tilde, t, s, y,
                                       n_eps, seed);
    double f0 = unlearn::mi_t_value(student, teacher, x_tilde, t, s, y, n_eps,
                                    seed);
    CHECK(f0 > 0.0);
    num::Rng rng(60);
    auto v = rng.normal_vec(g.size());
    double h = 1e-6;
    double up = unlearn::mi_t_value(nudged(student, v, h), teacher, x_tilde, t,
                                    s, y, n_eps, seed);
    double dn = unlearn::mi_t_value(nudged(student, v, -h), teacher, x_tilde,
                                    t, s, y, n_eps, seed);
    double fd = (up - dn) / (2 * h);
    CHECK(fd == doctest::Approx(dir_dot(g, v)).epsilon(1e-5));
}

TEST_CASE("exact MI gradient refuses oversized students") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel big(Architecture{}, 1);  // default width, > 1e4 parameters
    CHECK(big.params().size() > 10000);
    CHECK_THROWS(unlearn::full_mi_gradient(big, big, {0.0, 0.0}, 5, s,
                                           ConceptPrompt::only_a(0), 2, 1));
}

TEST_CASE("jacobian-free gradient is the scaled recorder gradient") {
    auto w = world::default_world();
    auto s = NoiseSchedule::cosine(20);
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 61);
    DenoiserModel student(Architecture::tiny(w.n_a(), w.n_b()), 62);
    std::vector<double> x_tilde = {-0.3, 0.7};
    auto y = ConceptPrompt::only_a(2);
    std::size_t t = 12;
    double sb = std::sqrt(1.0 - s.abar(t));

    auto jf = unlearn::jacobian_free_gradient(student, teacher, x_tilde, t, s,
                                              y, 8, 5);
    auto dk = unlearn::dkl_recorder_gradient(student, teacher, x_tilde, t, s,
                                             y, 8, 5);
    REQUIRE(jf.size() == dk.size());
    bool nonzero = false;
    for (std::size_t i = 0; i < jf.size(); ++i) {
        CHECK(jf[i] == -sb * dk[i]);
        if (jf[i] != 0.0) nonzero = true;
    }
    CHECK(nonzero);
}

TEST_CASE("unlearning run leaves the teacher untouched and is deterministic") {
    auto w = world::default_world();
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 71);
    auto before = teacher.params().values();
    auto fs = unlearn::build_forget_set(w, 1, 2, 72);
    UnlearnConfig cfg;
    cfg.steps = 5;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = 73;

    unlearn::UnlearnRunReport rep;
    auto s1 = unlearn::run_unlearn(teacher, w, fs, cfg, &rep);
    auto s2 = unlearn::run_unlearn(teacher, w, fs, cfg);
    CHECK(teacher.params().values() == before);
    CHECK(s1.params().values() == s2.params().values());
    CHECK(rep.loss_curve.size() == cfg.steps);
    CHECK(rep.wall_clock_ms > 0.0);
    CHECK(s1.params().values() != before);  // training moved the student

    cfg.steps = 0;
    auto frozen = unlearn::run_unlearn(teacher, w, fs, cfg);
    CHECK(frozen.params().values() == before);
}

TEST_CASE("label-blind teacher is a fixed point of erasure training") {
    auto w = world::default_world();
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 81);
    make_label_blind(teacher);
    auto fs = unlearn::build_forget_set(w, 0, 2, 82);
    UnlearnConfig cfg;
    cfg.steps = 4;
    cfg.batch_size = 4;
    cfg.seed = 83;
    unlearn::UnlearnRunReport rep;
    auto s = unlearn::run_unlearn(teacher, w, fs, cfg, &rep);
    CHECK(s.params().values() == teacher.params().values());
    for (double l : rep.loss_curve) CHECK(l == 0.0);
}

TEST_CASE("snapshots fire on the configured cadence") {
    auto w = world::default_world();
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 91);
    auto fs = unlearn::build_forget_set(w, 1, 2, 92);
    UnlearnConfig cfg;
    cfg.steps = 6;
    cfg.batch_size = 2;
    cfg.seed = 93;
    cfg.snapshot_every = 2;
    unlearn::UnlearnRunReport rep;
    std::vector<std::size_t> seen;
    unlearn::run_unlearn(teacher, w, fs, cfg, &rep,
                         [&](std::size_t step, const DenoiserModel&) {
                             seen.push_back(step);
                         });
    CHECK(seen == std::vector<std::size_t>{0, 2, 4, 6});
    CHECK(rep.snapshot_steps == seen);
}

TEST_CASE("erasure loss decreases over a short run") {
    auto w = world::default_world();
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 101);
    auto fs = unlearn::build_forget_set(w, 2, 4, 102);
    UnlearnConfig cfg;
    cfg.steps = 300;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-2;
    cfg.seed = 103;
    unlearn::UnlearnRunReport rep;
    unlearn::run_unlearn(teacher, w, fs, cfg, &rep);
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        head += rep.loss_curve[i];
        tail += rep.loss_curve[cfg.steps - 1 - i];
    }
    CHECK(tail < 0.2 * head);
}

TEST_CASE("retargeting and self-distillation runs complete") {
    auto w = world::default_world();
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 111);
    auto fs = unlearn::build_forget_set(w, 3, 2, 112);

    UnlearnConfig cfg;
    cfg.method = Method::retarget;
    cfg.retain_batch = 2;
    cfg.anchor_a = 0;
    cfg.steps = 3;
    cfg.batch_size = 3;
    cfg.seed = 113;
    unlearn::UnlearnRunReport rep;
    auto sr = unlearn::run_unlearn(teacher, w, fs, cfg, &rep);
    CHECK(rep.loss_curve.size() == 3);
    CHECK(sr.params().values() != teacher.params().values());

    cfg = UnlearnConfig{};
    cfg.method = Method::sdd;
    cfg.steps = 2;
    cfg.batch_size = 2;
    cfg.seed = 114;
    auto ss = unlearn::run_unlearn(teacher, w, fs, cfg, &rep);
    CHECK(rep.loss_curve.size() == 2);
    CHECK(ss.params().values() != teacher.params().values());
}

TEST_CASE("single-target multi-concept run reproduces the plain run") {
    auto w = world::default_world();
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 121);
    UnlearnConfig cfg;
    cfg.steps = 4;
    cfg.batch_size = 3;
    cfg.seed = 122;
    auto multi = unlearn::multi_concept_unlearn(teacher, w, {2}, 3, cfg);
    auto fs = unlearn::build_forget_set(
        w, 2, 3, num::derive_seed(cfg.seed, {0x6d63, 0}));
    auto single = unlearn::run_unlearn(teacher, w, fs, cfg);
    CHECK(multi.params().values() == single.params().values());
    CHECK_THROWS(unlearn::multi_concept_unlearn(teacher, w, {1, 1}, 2, cfg));
    CHECK_THROWS(unlearn::multi_concept_unlearn(teacher, w, {}, 2, cfg));
}

TEST_CASE("forget-set refresh changes the trajectory but stays deterministic") {
    auto w = world::default_world();
    DenoiserModel teacher(Architecture::tiny(w.n_a(), w.n_b()), 131);
    auto fs = unlearn::build_forget_set(w, 1, 2, 132);
    UnlearnConfig cfg;
    cfg.steps = 6;
    cfg.batch_size = 2;
    cfg.seed = 133;
    auto fixed = unlearn::run_unlearn(teacher, w, fs, cfg);
    cfg.refresh_every = 3;
    auto r1 = unlearn::run_unlearn(teacher, w, fs, cfg);
    auto r2 = unlearn::run_unlearn(teacher, w, fs, cfg);
    CHECK(r1.params().values() == r2.params().values());
    CHECK(r1.params().values() != fixed.params().values());
}
