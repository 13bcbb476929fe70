#include "mimmu/evalharness/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mimmu/diffusion/sampler.hpp"
#include "mimmu/numerics/optimizer.hpp"
#include "mimmu/numerics/rng.hpp"
#include "mimmu/numerics/tape.hpp"

namespace mimmu::eval {

using world::ConceptPrompt;

namespace {

std::uint64_t enc(const std::optional<int>& v) {
    return v ? static_cast<std::uint64_t>(*v) + 1 : 0;
}

// One generated-and-classified prompt cell. The seed depends only on
// (base seed, prompt), so every metric that touches a cell agrees on
// its contents.
CellCount cell_generate(const diff::NoisePredictor& model,
                        const world::ConceptWorld& world,
                        const ConceptPrompt& prompt,
                        const diff::NoiseSchedule& schedule, std::size_t n,
                        double gamma, std::uint64_t seed) {
    CellCount c;
    c.prompt = prompt;
    c.counts_a.assign(static_cast<std::size_t>(world.n_a()), 0);
    c.counts_b.assign(static_cast<std::size_t>(world.n_b()), 0);
    c.n = n;
    auto pts = diff::sample(model, schedule, prompt, gamma, n,
                            num::derive_seed(seed, {0x6365, enc(prompt.a),
                                                    enc(prompt.b)}));
    for (const auto& x : pts) {
        auto [a, b] = world.bayes_argmax(x);
        ++c.counts_a[static_cast<std::size_t>(a)];
        ++c.counts_b[static_cast<std::size_t>(b)];
    }
    return c;
}

bool contains(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

char* fmt_double(char* buf, std::size_t cap, double v) {
    std::snprintf(buf, cap, "%.17g", v);
    return buf;
}

std::string num_str(double v) {
    char buf[40];
    return fmt_double(buf, sizeof buf, v);
}

void append_array(std::string& out, const std::vector<double>& v) {
    out += "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += num_str(v[i]);
    }
    out += "]";
}

}  // namespace

double unlearning_accuracy(const diff::NoisePredictor& model,
                           const world::ConceptWorld& world, int target_a,
                           const diff::NoiseSchedule& schedule, std::size_t n,
                           double gamma, std::uint64_t seed,
                           std::vector<CellCount>* cells) {
    if (target_a < 0 || target_a >= world.n_a())
        throw std::out_of_range("unlearning_accuracy: target out of range");
    if (n < 1) throw std::invalid_argument("unlearning_accuracy: n < 1");
    double acc = 0.0;
    for (int b = 0; b < world.n_b(); ++b) {
        auto c = cell_generate(model, world, ConceptPrompt::both(target_a, b),
                               schedule, n, gamma, seed);
        acc += 1.0 -
               static_cast<double>(
                   c.counts_a[static_cast<std::size_t>(target_a)]) /
                   static_cast<double>(n);
        if (cells) cells->push_back(std::move(c));
    }
    return acc / static_cast<double>(world.n_b());
}

double retain_accuracy(const diff::NoisePredictor& model,
                       const world::ConceptWorld& world,
                       const std::vector<int>& erased_a, RetainAxis axis,
                       const diff::NoiseSchedule& schedule, std::size_t n,
                       double gamma, std::uint64_t seed,
                       std::vector<CellCount>* cells) {
    if (n < 1) throw std::invalid_argument("retain_accuracy: n < 1");
    double acc = 0.0;
    std::size_t n_cells = 0;
    for (int a = 0; a < world.n_a(); ++a) {
        if (contains(erased_a, a)) continue;
        for (int b = 0; b < world.n_b(); ++b) {
            auto c = cell_generate(model, world, ConceptPrompt::both(a, b),
                                   schedule, n, gamma, seed);
            std::size_t hit =
                axis == RetainAxis::in_domain
                    ? c.counts_a[static_cast<std::size_t>(a)]
                    : c.counts_b[static_cast<std::size_t>(b)];
            acc += static_cast<double>(hit) / static_cast<double>(n);
            ++n_cells;
            if (cells) cells->push_back(std::move(c));
        }
    }
    if (axis == RetainAxis::cross_domain) {
        for (int b = 0; b < world.n_b(); ++b) {
            auto c = cell_generate(model, world, ConceptPrompt::only_b(b),
                                   schedule, n, gamma, seed);
            acc += static_cast<double>(
                       c.counts_b[static_cast<std::size_t>(b)]) /
                   static_cast<double>(n);
            ++n_cells;
            if (cells) cells->push_back(std::move(c));
        }
    }
    if (n_cells == 0)
        throw std::invalid_argument("retain_accuracy: nothing retained");
    return acc / static_cast<double>(n_cells);
}

namespace {

// squared 2-Wasserstein between two sorted 1-D samples via their step
// quantile functions; exact for unequal sizes
double w2_squared_sorted(const std::vector<double>& a,
                         const std::vector<double>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::size_t i = 0, j = 0;
    double u = 0.0, acc = 0.0;
    while (i < n && j < m) {
        double ua = static_cast<double>(i + 1) / static_cast<double>(n);
        double ub = static_cast<double>(j + 1) / static_cast<double>(m);
        double next = std::min(ua, ub);
        double diff = a[i] - b[j];
        acc += (next - u) * diff * diff;
        if (ua <= next) ++i;
        if (ub <= next) ++j;
        u = next;
    }
    return acc;
}

}  // namespace

double sliced_wasserstein(const std::vector<std::vector<double>>& set_a,
                          const std::vector<std::vector<double>>& set_b,
                          std::size_t n_projections, std::uint64_t seed) {
    if (set_a.empty() || set_b.empty())
        throw std::invalid_argument("sliced_wasserstein: empty set");
    const std::size_t d = set_a[0].size();
    for (const auto& x : set_a)
        if (x.size() != d)
            throw std::invalid_argument("sliced_wasserstein: ragged set");
    for (const auto& x : set_b)
        if (x.size() != d)
            throw std::invalid_argument(
                "sliced_wasserstein: dimension mismatch");
    if (n_projections < 1)
        throw std::invalid_argument("sliced_wasserstein: no projections");

    double acc = 0.0;
    for (std::size_t k = 0; k < n_projections; ++k) {
        num::Rng rng(num::derive_seed(seed, {0x7377, k}));
        std::vector<double> v;
        double norm = 0.0;
        while (norm < 1e-12) {
            v = rng.normal_vec(d);
            norm = std::sqrt(num::squared_norm(v));
        }
        for (auto& c : v) c /= norm;
        std::vector<double> pa(set_a.size()), pb(set_b.size());
        for (std::size_t i = 0; i < set_a.size(); ++i)
            pa[i] = num::dot(v, set_a[i]);
        for (std::size_t i = 0; i < set_b.size(); ++i)
            pb[i] = num::dot(v, set_b[i]);
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        acc += std::sqrt(w2_squared_sorted(pa, pb));
    }
    return acc / static_cast<double>(n_projections);
}

MiDropResult mi_drop(const diff::DenoiserModel& teacher,
                     const diff::DenoiserModel& student,
                     const world::ConceptWorld& world, int target_a,
                     const diff::NoiseSchedule& schedule,
                     const info::LogSnrGrid& grid, const EvalConfig& config) {
    if (target_a < 0 || target_a >= world.n_a())
        throw std::out_of_range("mi_drop: target out of range");
    auto prompt = ConceptPrompt::only_a(target_a);
    // both sides share their random streams, so an unchanged student
    // scores a drop of exactly zero
    auto score = [&](const diff::DenoiserModel& m) {
        auto gen = diff::sample(
            m, schedule, prompt, config.gamma, config.mi_points,
            num::derive_seed(config.seed, {0x6d64,
                                           static_cast<std::uint64_t>(
                                               target_a)}));
        return info::mi_nonneg_batch(m, gen, prompt, grid, config.mi_n_eps,
                                     num::derive_seed(config.seed, {0x6d65}));
    };
    auto ts = score(teacher);
    auto ss = score(student);
    MiDropResult r;
    r.teacher_mi = ts.value;
    r.student_mi = ss.value;
    r.applicable = ts.value > std::max(0.01, 3.0 * ts.std_error);
    if (r.applicable)
        r.value = std::clamp(1.0 - ss.value / ts.value, 0.0, 1.0);
    return r;
}

EvalReport evaluate(const diff::DenoiserModel& teacher,
                    const diff::DenoiserModel& student,
                    const world::ConceptWorld& world,
                    const std::vector<int>& erased_a,
                    const diff::NoiseSchedule& schedule,
                    const EvalConfig& config) {
    if (erased_a.empty())
        throw std::invalid_argument("evaluate: nothing erased");
    EvalReport r;
    r.n_per_cell = config.n_per_cell;
    r.seed = config.seed;

    double ua = 0.0;
    for (int t : erased_a)
        ua += unlearning_accuracy(student, world, t, schedule,
                                  config.n_per_cell, config.gamma, config.seed,
                                  &r.cells);
    r.ua = ua / static_cast<double>(erased_a.size());
    r.ira = retain_accuracy(student, world, erased_a, RetainAxis::in_domain,
                            schedule, config.n_per_cell, config.gamma,
                            config.seed, &r.cells);
    r.cra = retain_accuracy(student, world, erased_a, RetainAxis::cross_domain,
                            schedule, config.n_per_cell, config.gamma,
                            config.seed);

    auto gen = [&](const diff::DenoiserModel& m, std::uint64_t tag) {
        return diff::sample(m, schedule, ConceptPrompt::null(), config.gamma,
                            config.sw_samples,
                            num::derive_seed(config.seed, {0x7367, tag}));
    };
    r.sw_distance = sliced_wasserstein(gen(student, 1), gen(teacher, 0),
                                       config.sw_projections,
                                       num::derive_seed(config.seed,
                                                        {0x7368}));

    auto grid = info::LogSnrGrid::uniform();
    double drop = 0.0;
    bool applicable = true;
    for (int t : erased_a) {
        auto d = mi_drop(teacher, student, world, t, schedule, grid, config);
        drop += d.value;
        applicable = applicable && d.applicable;
    }
    r.mi_drop = drop / static_cast<double>(erased_a.size());
    r.mi_drop_applicable = applicable;
    return r;
}

SequentialReport sequential_protocol(const diff::DenoiserModel& teacher,
                                     const world::ConceptWorld& world,
                                     const std::vector<int>& targets,
                                     const unlearn::UnlearnConfig& ucfg,
                                     std::size_t forget_per_b,
                                     const diff::NoiseSchedule& schedule,
                                     const EvalConfig& ecfg,
                                     diff::DenoiserModel* final_student) {
    if (targets.size() < 2)
        throw std::invalid_argument(
            "sequential_protocol: needs at least two requests");
    SequentialReport rep;
    rep.targets = targets;
    const std::size_t k = targets.size();
    rep.ua.assign(k, std::vector<double>(k, -1.0));
    rep.rebound.assign(k, std::vector<bool>(k, false));

    diff::DenoiserModel student = teacher;
    std::vector<int> erased;
    for (std::size_t j = 0; j < k; ++j) {
        auto fs = unlearn::build_forget_set(
            world, targets[j], forget_per_b,
            num::derive_seed(ucfg.seed, {0x7365, j}));
        auto cfg = ucfg;
        cfg.seed = num::derive_seed(ucfg.seed, {0x7371, j});
        student = unlearn::run_unlearn(student, world, fs, cfg);
        erased.push_back(targets[j]);

        for (std::size_t i = 0; i <= j; ++i) {
            rep.ua[i][j] = unlearning_accuracy(
                student, world, targets[i], schedule, ecfg.n_per_cell,
                ecfg.gamma, num::derive_seed(ecfg.seed, {0x7375, j}));
            if (j > i && rep.ua[i][j] < rep.ua[i][j - 1] - 0.05) {
                rep.rebound[i][j] = true;
                rep.any_rebound = true;
            }
        }
        double ira = retain_accuracy(
            student, world, erased, RetainAxis::in_domain, schedule,
            ecfg.n_per_cell, ecfg.gamma,
            num::derive_seed(ecfg.seed, {0x7372, j}));
        double cra = retain_accuracy(
            student, world, erased, RetainAxis::cross_domain, schedule,
            ecfg.n_per_cell, ecfg.gamma,
            num::derive_seed(ecfg.seed, {0x7372, j}));
        rep.ra.push_back(0.5 * (ira + cra));
    }
    if (final_student) *final_student = std::move(student);
    return rep;
}

RelearnReport relearn_protocol(const diff::DenoiserModel& student,
                               const world::ConceptWorld& world,
                               const std::vector<int>& erased_a,
                               const diff::NoiseSchedule& schedule,
                               const RelearnConfig& rcfg,
                               const EvalConfig& ecfg) {
    if (erased_a.empty())
        throw std::invalid_argument("relearn_protocol: nothing erased");
    std::vector<std::pair<int, int>> cells;
    for (int a = 0; a < world.n_a(); ++a) {
        if (contains(erased_a, a)) continue;
        if (rcfg.data == RelearnData::class_wise) {
            if (!rcfg.class_a)
                throw std::invalid_argument(
                    "relearn_protocol: class_wise needs class_a");
            if (a != *rcfg.class_a) continue;
        }
        for (int b = 0; b < world.n_b(); ++b) cells.emplace_back(a, b);
    }
    if (rcfg.data == RelearnData::class_wise && rcfg.class_a &&
        contains(erased_a, *rcfg.class_a))
        throw std::invalid_argument(
            "relearn_protocol: fine-tune class was erased");
    if (cells.empty())
        throw std::invalid_argument("relearn_protocol: no retain cells");

    const std::size_t d = world.dim();
    const std::size_t B = rcfg.batch_size;
    diff::DenoiserModel model = student;
    auto opt = num::OptimizerState::adam_state(rcfg.learning_rate,
                                               model.params().size());

    auto measure_ua = [&](std::size_t epoch) {
        double ua = 0.0;
        for (int t : erased_a)
            ua += unlearning_accuracy(
                model, world, t, schedule, ecfg.n_per_cell, ecfg.gamma,
                num::derive_seed(ecfg.seed, {0x726c, epoch}));
        return ua / static_cast<double>(erased_a.size());
    };

    RelearnReport rep;
    rep.data = rcfg.data;
    rep.ua_per_epoch.push_back(measure_ua(0));

    for (std::size_t epoch = 0; epoch < rcfg.epochs; ++epoch) {
        for (std::size_t step = 0; step < rcfg.batches_per_epoch; ++step) {
            num::Rng rng(num::derive_seed(rcfg.seed, {0x7265, epoch, step}));
            num::Tensor xt({B, d}), eps({B, d});
            std::vector<double> alphas(B);
            std::vector<ConceptPrompt> prompts(B);
            for (std::size_t i = 0; i < B; ++i) {
                auto [a, b] = cells[rng.uniform_index(cells.size())];
                auto s = world.sample(
                    ConceptPrompt::both(a, b), 1,
                    num::derive_seed(rcfg.seed, {0x7266, epoch, step, i}))[0];
                std::size_t t = 1 + rng.uniform_index(schedule.T());
                alphas[i] = schedule.logsnr(t);
                double sa = std::sqrt(schedule.abar(t));
                double sb = std::sqrt(1.0 - schedule.abar(t));
                for (std::size_t jj = 0; jj < d; ++jj) {
                    double e = rng.normal();
                    eps.data[i * d + jj] = e;
                    xt.data[i * d + jj] = sa * s.x[jj] + sb * e;
                }
                ConceptPrompt p = ConceptPrompt::both(a, b);
                if (rng.uniform() < 0.1) p.a.reset();
                if (rng.uniform() < 0.1) p.b.reset();
                prompts[i] = p;
            }
            num::GradientTape tape;
            auto pn = tape.param(model.params());
            auto pred = model.forward_on_tape(tape, pn,
                                              tape.constant(std::move(xt)),
                                              alphas, prompts);
            auto loss = tape.scale(
                tape.sum_sq(tape.sub(pred, tape.constant(std::move(eps)))),
                1.0 / static_cast<double>(B));
            if (!std::isfinite(tape.value(loss).data[0]))
                throw std::runtime_error("relearn_protocol: non-finite loss");
            tape.backward(loss);
            num::optimizer_step(model.params(), tape.grad(pn).data, opt);
        }
        rep.ua_per_epoch.push_back(measure_ua(epoch + 1));
    }
    rep.delta_ua = rep.ua_per_epoch.front() - rep.ua_per_epoch.back();
    return rep;
}

BreakdownReport breakdown_probe(const diff::DenoiserModel& teacher,
                                const world::ConceptWorld& world, int target_a,
                                std::size_t step_stride, std::size_t n_steps,
                                const unlearn::UnlearnConfig& ucfg,
                                std::size_t forget_per_b,
                                const diff::NoiseSchedule& schedule,
                                const EvalConfig& ecfg,
                                diff::DenoiserModel* final_mim,
                                diff::DenoiserModel* final_sdd) {
    if (step_stride < 1 || n_steps < 1)
        throw std::invalid_argument("breakdown_probe: empty step grid");
    BreakdownReport rep;
    for (std::size_t s = 0; s <= n_steps; ++s)
        rep.steps.push_back(s * step_stride);
    rep.ua.assign(2, {});
    rep.ira.assign(2, {});
    rep.cra.assign(2, {});

    // fixed drift probe: noised retained points at interior timesteps
    const std::size_t n_probe = 64;
    num::Rng prng(num::derive_seed(ecfg.seed, {0x6271}));
    auto probe_pts = world.sample(ConceptPrompt::null(), n_probe,
                                  num::derive_seed(ecfg.seed, {0x6272}));
    std::vector<std::size_t> probe_t(n_probe);
    std::vector<std::vector<double>> probe_x(n_probe);
    for (std::size_t i = 0; i < n_probe; ++i) {
        probe_t[i] = 1 + prng.uniform_index(schedule.T());
        probe_x[i].resize(world.dim());
        double sa = std::sqrt(schedule.abar(probe_t[i]));
        double sb = std::sqrt(1.0 - schedule.abar(probe_t[i]));
        for (std::size_t j = 0; j < world.dim(); ++j)
            probe_x[i][j] = sa * probe_pts[i].x[j] + sb * prng.normal();
    }
    auto drift = [&](const diff::DenoiserModel& m) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n_probe; ++i) {
            double alpha = schedule.logsnr(probe_t[i]);
            auto p = m.predict(probe_x[i], alpha, ConceptPrompt::null());
            auto q = teacher.predict(probe_x[i], alpha, ConceptPrompt::null());
            acc += num::squared_distance(p, q);
        }
        return acc / static_cast<double>(n_probe);
    };

    std::vector<int> erased = {target_a};
    for (std::size_t method = 0; method < 2; ++method) {
        auto cfg = ucfg;
        cfg.method = method == 0 ? unlearn::Method::mim_mu
                                 : unlearn::Method::sdd;
        cfg.retain_batch = 0;
        cfg.anchor_a.reset();
        cfg.steps = step_stride * n_steps;
        cfg.snapshot_every = step_stride;
        auto fs = unlearn::build_forget_set(
            world, target_a, forget_per_b,
            num::derive_seed(ucfg.seed, {0x6273}));
        auto trained = unlearn::run_unlearn(
            teacher, world, fs, cfg, nullptr,
            [&](std::size_t step, const diff::DenoiserModel& m) {
                auto eseed = num::derive_seed(ecfg.seed, {0x6270, step});
                rep.ua[method].push_back(unlearning_accuracy(
                    m, world, target_a, schedule, ecfg.n_per_cell, ecfg.gamma,
                    eseed));
                rep.ira[method].push_back(retain_accuracy(
                    m, world, erased, RetainAxis::in_domain, schedule,
                    ecfg.n_per_cell, ecfg.gamma, eseed));
                rep.cra[method].push_back(retain_accuracy(
                    m, world, erased, RetainAxis::cross_domain, schedule,
                    ecfg.n_per_cell, ecfg.gamma, eseed));
                if (method == 1) rep.sdd_uncond_drift.push_back(drift(m));
            });
    }
    return rep;
}

std::string report_json(const EvalReport& r) {
    std::string out = "{\"ua\":" + num_str(r.ua);
    out += ",\"ira\":" + num_str(r.ira);
    out += ",\"cra\":" + num_str(r.cra);
    out += ",\"nra\":" + (r.nra ? num_str(*r.nra) : std::string("null"));
    out += ",\"ora\":" + (r.ora ? num_str(*r.ora) : std::string("null"));
    out += ",\"sw_distance\":" + num_str(r.sw_distance);
    out += ",\"mi_drop\":" + num_str(r.mi_drop);
    out += ",\"mi_drop_applicable\":";
    out += r.mi_drop_applicable ? "true" : "false";
    out += ",\"n_per_cell\":" + std::to_string(r.n_per_cell);
    out += ",\"seed\":" + std::to_string(r.seed);
    out += ",\"cells\":[";
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        const auto& c = r.cells[i];
        if (i) out += ",";
        out += "{\"a\":";
        out += c.prompt.a ? std::to_string(*c.prompt.a) : "null";
        out += ",\"b\":";
        out += c.prompt.b ? std::to_string(*c.prompt.b) : "null";
        out += ",\"n\":" + std::to_string(c.n);
        out += ",\"counts_a\":[";
        for (std::size_t k = 0; k < c.counts_a.size(); ++k)
            out += (k ? "," : "") + std::to_string(c.counts_a[k]);
        out += "],\"counts_b\":[";
        for (std::size_t k = 0; k < c.counts_b.size(); ++k)
            out += (k ? "," : "") + std::to_string(c.counts_b[k]);
        out += "]}";
    }
    out += "]}";
    return out;
}

std::string report_json(const SequentialReport& r) {
    std::string out = "{\"targets\":[";
    for (std::size_t i = 0; i < r.targets.size(); ++i)
        out += (i ? "," : "") + std::to_string(r.targets[i]);
    out += "],\"ua\":[";
    for (std::size_t i = 0; i < r.ua.size(); ++i) {
        if (i) out += ",";
        append_array(out, r.ua[i]);
    }
    out += "],\"ra\":";
    append_array(out, r.ra);
    out += ",\"rebound\":[";
    for (std::size_t i = 0; i < r.rebound.size(); ++i) {
        if (i) out += ",";
        out += "[";
        for (std::size_t j = 0; j < r.rebound[i].size(); ++j) {
            if (j) out += ",";
            out += r.rebound[i][j] ? "true" : "false";
        }
        out += "]";
    }
    out += "],\"any_rebound\":";
    out += r.any_rebound ? "true" : "false";
    out += "}";
    return out;
}

std::string report_json(const RelearnReport& r) {
    std::string out = "{\"data\":\"";
    out += r.data == RelearnData::class_wise ? "class_wise" : "random_subset";
    out += "\",\"ua_per_epoch\":";
    append_array(out, r.ua_per_epoch);
    out += ",\"delta_ua\":" + num_str(r.delta_ua) + "}";
    return out;
}

std::string report_json(const BreakdownReport& r) {
    std::string out = "{\"steps\":[";
    for (std::size_t i = 0; i < r.steps.size(); ++i)
        out += (i ? "," : "") + std::to_string(r.steps[i]);
    out += "],\"methods\":[\"mim_mu\",\"sdd\"]";
    auto block = [&](const char* name,
                     const std::vector<std::vector<double>>& m) {
        out += std::string(",\"") + name + "\":[";
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (i) out += ",";
            append_array(out, m[i]);
        }
        out += "]";
    };
    block("ua", r.ua);
    block("ira", r.ira);
    block("cra", r.cra);
    out += ",\"sdd_uncond_drift\":";
    append_array(out, r.sdd_uncond_drift);
    out += "}";
    return out;
}

std::string report_csv(const EvalReport& r, const std::string& protocol) {
    std::string out = "protocol,method,request,metric,value,seed\n";
    auto row = [&](const char* metric, double v) {
        out += protocol + ",,," + metric + "," + num_str(v) + "," +
               std::to_string(r.seed) + "\n";
    };
    row("ua", r.ua);
    row("ira", r.ira);
    row("cra", r.cra);
    if (r.nra) row("nra", *r.nra);
    if (r.ora) row("ora", *r.ora);
    row("sw_distance", r.sw_distance);
    if (r.mi_drop_applicable) row("mi_drop", r.mi_drop);
    return out;
}

std::string report_csv(const SequentialReport& r) {
    std::string out = "protocol,method,request,metric,value,seed\n";
    for (std::size_t j = 0; j < r.ra.size(); ++j) {
        for (std::size_t i = 0; i <= j; ++i)
            out += "sequential,," + std::to_string(j) + ",ua_target" +
                   std::to_string(r.targets[i]) + "," +
                   num_str(r.ua[i][j]) + ",\n";
        out += "sequential,," + std::to_string(j) + ",ra," +
               num_str(r.ra[j]) + ",\n";
    }
    return out;
}

}  // namespace mimmu::eval
