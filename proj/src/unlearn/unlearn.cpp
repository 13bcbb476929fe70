#include "mimmu/unlearn/unlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mimmu/diffusion/sampler.hpp"
#include "mimmu/numerics/optimizer.hpp"
#include "mimmu/numerics/rng.hpp"
#include "mimmu/numerics/tape.hpp"

namespace mimmu::unlearn {

using diff::DenoiserModel;
using num::GradientTape;
using num::Rng;
using num::Tensor;

ForgetSet build_forget_set(const world::ConceptWorld& world, int target_a,
                           std::size_t per_b, std::uint64_t seed) {
    if (target_a < 0 || target_a >= world.n_a())
        throw std::out_of_range("build_forget_set: target out of range");
    if (per_b < 1) throw std::invalid_argument("build_forget_set: per_b < 1");
    ForgetSet out;
    out.target = world::ConceptPrompt::only_a(target_a);
    for (int b = 0; b < world.n_b(); ++b) {
        auto cell = world.sample(world::ConceptPrompt::both(target_a, b),
                                 per_b, num::derive_seed(seed, {0x6673,
                                                               (std::uint64_t)
                                                                   b}));
        out.samples.insert(out.samples.end(), cell.begin(), cell.end());
    }
    return out;
}

void validate(const UnlearnConfig& config) {
    if (config.batch_size < 1)
        throw std::invalid_argument("UnlearnConfig: batch_size < 1");
    bool retarget = config.method == Method::retarget;
    // MiM-MU and SDD are compensation free: no retain data, no anchor
    if (retarget != (config.retain_batch > 0))
        throw std::invalid_argument(
            "UnlearnConfig: retain data required exactly for retargeting");
    if (!retarget && config.anchor_a)
        throw std::invalid_argument(
            "UnlearnConfig: anchor prompt is a retargeting option");
    if (config.ema_decay < 0.0 || config.ema_decay >= 1.0)
        throw std::invalid_argument("UnlearnConfig: ema_decay outside [0,1)");
}

namespace {

// noised batch rows x_t = sqrt(abar_t) x + sqrt(1-abar_t) eps
Tensor noised_rows(const std::vector<double>& x,
                   const std::vector<std::size_t>& t,
                   const std::vector<double>& eps,
                   const diff::NoiseSchedule& schedule, std::size_t d) {
    const std::size_t B = t.size();
    if (x.size() != B * d || eps.size() != B * d)
        throw std::invalid_argument("noised_rows: shape");
    Tensor xt({B, d});
    for (std::size_t i = 0; i < B; ++i) {
        double sa = std::sqrt(schedule.abar(t[i]));
        double sb = std::sqrt(1.0 - schedule.abar(t[i]));
        for (std::size_t j = 0; j < d; ++j)
            xt.data[i * d + j] = sa * x[i * d + j] + sb * eps[i * d + j];
    }
    return xt;
}

std::vector<double> alphas_of(const std::vector<std::size_t>& t,
                              const diff::NoiseSchedule& schedule) {
    std::vector<double> a(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) a[i] = schedule.logsnr(t[i]);
    return a;
}

std::vector<double> mim_target_values(const DenoiserModel& teacher,
                                      const Tensor& xt,
                                      const std::vector<double>& alphas,
                                      MimTarget target) {
    const std::size_t B = xt.rows(), d = xt.cols();
    switch (target) {
        case MimTarget::teacher_uncond: {
            std::vector<world::ConceptPrompt> null_p(
                B, world::ConceptPrompt::null());
            return teacher.predict_batch(xt.data, alphas, null_p);
        }
        case MimTarget::gaussian: {
            // optimal noise estimate for standard-normal data
            std::vector<double> v(B * d);
            for (std::size_t i = 0; i < B; ++i) {
                double sb = std::sqrt(diff::sigmoid(-alphas[i]));
                for (std::size_t j = 0; j < d; ++j)
                    v[i * d + j] = sb * xt.data[i * d + j];
            }
            return v;
        }
        case MimTarget::zero:
            return std::vector<double>(B * d, 0.0);
    }
    throw std::logic_error("mim_target_values: unreachable");
}

}  // namespace

LossGrad mim_mu_loss(const DenoiserModel& student, const DenoiserModel& teacher,
                     const std::vector<double>& x,
                     const std::vector<std::size_t>& t,
                     const std::vector<double>& eps,
                     const diff::NoiseSchedule& schedule,
                     const world::ConceptPrompt& prompt_y, MimTarget target) {
    return mim_mu_loss(student, teacher, x, t, eps, schedule,
                       std::vector<world::ConceptPrompt>(t.size(), prompt_y),
                       target);
}

LossGrad mim_mu_loss(const DenoiserModel& student, const DenoiserModel& teacher,
                     const std::vector<double>& x,
                     const std::vector<std::size_t>& t,
                     const std::vector<double>& eps,
                     const diff::NoiseSchedule& schedule,
                     const std::vector<world::ConceptPrompt>& prompts,
                     MimTarget target) {
    for (const auto& p : prompts)
        if (p.is_null())
            throw std::invalid_argument("mim_mu_loss: prompt must not be null");
    const std::size_t d = student.arch().dim;
    const std::size_t B = t.size();
    if (prompts.size() != B)
        throw std::invalid_argument("mim_mu_loss: prompt count mismatch");
    auto xt = noised_rows(x, t, eps, schedule, d);
    auto alphas = alphas_of(t, schedule);
    auto target_v = mim_target_values(teacher, xt, alphas, target);

    GradientTape tape;
    auto pn = tape.param(student.params());
    auto xn = tape.constant(xt);
    auto pred = student.forward_on_tape(tape, pn, xn, alphas, prompts);
    auto tgt = tape.constant(Tensor({B, d}, std::move(target_v)));
    auto loss = tape.scale(tape.sum_sq(tape.sub(pred, tgt)),
                           1.0 / static_cast<double>(B));
    tape.backward(loss);
    return {tape.value(loss).data[0], tape.grad(pn).data};
}

std::vector<double> mim_mu_analytic_gradient(
    const DenoiserModel& student, const DenoiserModel& teacher,
    const std::vector<double>& x, const std::vector<std::size_t>& t,
    const std::vector<double>& eps, const diff::NoiseSchedule& schedule,
    const world::ConceptPrompt& prompt_y, MimTarget target) {
    const std::size_t d = student.arch().dim;
    const std::size_t B = t.size();
    auto xt = noised_rows(x, t, eps, schedule, d);
    auto alphas = alphas_of(t, schedule);
    auto target_v = mim_target_values(teacher, xt, alphas, target);

    std::vector<world::ConceptPrompt> prompts(B, prompt_y);
    auto pred_v = student.predict_batch(xt.data, alphas, prompts);
    Tensor gap({B, d});
    for (std::size_t k = 0; k < pred_v.size(); ++k)
        gap.data[k] = (2.0 / static_cast<double>(B)) *
                      (pred_v[k] - target_v[k]);

    GradientTape tape;
    auto pn = tape.param(student.params());
    auto xn = tape.constant(xt);
    auto pred = student.forward_on_tape(tape, pn, xn, alphas, prompts);
    auto loss = tape.dot(tape.constant(std::move(gap)), pred);
    tape.backward(loss);
    return tape.grad(pn).data;
}

LossGrad sdd_loss(const DenoiserModel& student, const DenoiserModel& ema_model,
                  const diff::NoiseSchedule& schedule,
                  const std::vector<std::size_t>& t,
                  const world::ConceptPrompt& prompt_y, double gamma,
                  std::uint64_t seed) {
    return sdd_loss(student, ema_model, schedule, t,
                    std::vector<world::ConceptPrompt>(t.size(), prompt_y),
                    gamma, seed);
}

LossGrad sdd_loss(const DenoiserModel& student, const DenoiserModel& ema_model,
                  const diff::NoiseSchedule& schedule,
                  const std::vector<std::size_t>& t,
                  const std::vector<world::ConceptPrompt>& prompts,
                  double gamma, std::uint64_t seed) {
    for (const auto& p : prompts)
        if (p.is_null())
            throw std::invalid_argument("sdd_loss: prompt must not be null");
    const std::size_t d = student.arch().dim;
    const std::size_t B = t.size();
    if (prompts.size() != B)
        throw std::invalid_argument("sdd_loss: prompt count mismatch");
    Tensor xt({B, d});
    xt.data = diff::partial_sample_batch(ema_model, schedule, prompts, gamma,
                                         t, num::derive_seed(seed, {0x7364}));
    auto alphas = alphas_of(t, schedule);
    // unconditional branch of the student itself, held constant
    std::vector<world::ConceptPrompt> null_p(B, world::ConceptPrompt::null());
    auto target_v = student.predict_batch(xt.data, alphas, null_p);

    GradientTape tape;
    auto pn = tape.param(student.params());
    auto xn = tape.constant(xt);
    auto pred = student.forward_on_tape(tape, pn, xn, alphas, prompts);
    auto tgt = tape.constant(Tensor({B, d}, std::move(target_v)));
    auto loss = tape.scale(tape.sum_sq(tape.sub(pred, tgt)),
                           1.0 / static_cast<double>(B));
    tape.backward(loss);
    return {tape.value(loss).data[0], tape.grad(pn).data};
}

LossGrad retarget_loss(const DenoiserModel& student,
                       const DenoiserModel& teacher,
                       const std::vector<double>& forget_x,
                       const std::vector<std::size_t>& forget_t,
                       const std::vector<double>& forget_eps,
                       const std::vector<world::LabeledSample>& retain,
                       const std::vector<std::size_t>& retain_t,
                       const std::vector<double>& retain_eps,
                       const diff::NoiseSchedule& schedule,
                       const world::ConceptPrompt& prompt_y,
                       const world::ConceptPrompt& anchor_prompt) {
    if (retain.empty())
        throw std::invalid_argument("retarget_loss: retain data missing");
    const std::size_t d = student.arch().dim;
    const std::size_t Bf = forget_t.size();
    const std::size_t Br = retain_t.size();

    auto xt_f = noised_rows(forget_x, forget_t, forget_eps, schedule, d);
    std::vector<double> retain_x(Br * d);
    std::vector<world::ConceptPrompt> retain_prompts(Br);
    for (std::size_t i = 0; i < Br; ++i) {
        std::copy(retain[i].x.begin(), retain[i].x.end(),
                  retain_x.begin() + i * d);
        retain_prompts[i] =
            world::ConceptPrompt::both(retain[i].label_a, retain[i].label_b);
    }
    auto xt_r = noised_rows(retain_x, retain_t, retain_eps, schedule, d);
    auto alphas_f = alphas_of(forget_t, schedule);
    auto alphas_r = alphas_of(retain_t, schedule);

    std::vector<world::ConceptPrompt> anchor_p(Bf, anchor_prompt);
    auto target_f = teacher.predict_batch(xt_f.data, alphas_f, anchor_p);
    auto target_r = teacher.predict_batch(xt_r.data, alphas_r, retain_prompts);

    GradientTape tape;
    auto pn = tape.param(student.params());
    std::vector<world::ConceptPrompt> prompts_f(Bf, prompt_y);
    auto pred_f = student.forward_on_tape(tape, pn, tape.constant(xt_f),
                                          alphas_f, prompts_f);
    auto pred_r = student.forward_on_tape(tape, pn, tape.constant(xt_r),
                                          alphas_r, retain_prompts);
    auto lf = tape.scale(
        tape.sum_sq(tape.sub(pred_f,
                             tape.constant(Tensor({Bf, d},
                                                  std::move(target_f))))),
        1.0 / static_cast<double>(Bf));
    auto lr = tape.scale(
        tape.sum_sq(tape.sub(pred_r,
                             tape.constant(Tensor({Br, d},
                                                  std::move(target_r))))),
        1.0 / static_cast<double>(Br));
    auto loss = tape.add(lf, lr);
    tape.backward(loss);
    return {tape.value(loss).data[0], tape.grad(pn).data};
}

namespace {

std::vector<double> draw_eps(std::size_t n_eps, std::size_t d,
                             std::uint64_t seed) {
    Rng rng(num::derive_seed(seed, {0x6d74}));
    return rng.normal_vec(n_eps * d);
}

}  // namespace

double mi_t_value(const DenoiserModel& student, const DenoiserModel& teacher,
                  const std::vector<double>& x_tilde, std::size_t t,
                  const diff::NoiseSchedule& schedule,
                  const world::ConceptPrompt& prompt_y, std::size_t n_eps,
                  std::uint64_t seed) {
    if (prompt_y.is_null())
        throw std::invalid_argument("mi_t_value: prompt must not be null");
    const std::size_t d = student.arch().dim;
    const double alpha = schedule.logsnr(t);
    const double sb = std::sqrt(1.0 - schedule.abar(t));
    auto pred = student.predict(x_tilde, alpha, prompt_y);
    auto eps = draw_eps(n_eps, d, seed);
    double acc = 0.0;
    for (std::size_t k = 0; k < n_eps; ++k) {
        std::vector<double> xt(d);
        for (std::size_t j = 0; j < d; ++j)
            xt[j] = x_tilde[j] + sb * (eps[k * d + j] - pred[j]);
        auto c = teacher.predict(xt, alpha, prompt_y);
        auto u = teacher.predict(xt, alpha, world::ConceptPrompt::null());
        acc += 0.5 * num::squared_distance(c, u);
    }
    return acc / static_cast<double>(n_eps);
}

std::vector<double> full_mi_gradient(const DenoiserModel& student,
                                     const DenoiserModel& teacher,
                                     const std::vector<double>& x_tilde,
                                     std::size_t t,
                                     const diff::NoiseSchedule& schedule,
                                     const world::ConceptPrompt& prompt_y,
                                     std::size_t n_eps, std::uint64_t seed) {
    if (prompt_y.is_null())
        throw std::invalid_argument(
            "full_mi_gradient: prompt must not be null");
    if (student.params().size() > 10000)
        throw std::invalid_argument(
            "full_mi_gradient: verification path requires <= 1e4 parameters");
    const std::size_t d = student.arch().dim;
    const double alpha = schedule.logsnr(t);
    const double sb = std::sqrt(1.0 - schedule.abar(t));
    auto eps = draw_eps(n_eps, d, seed);

    GradientTape tape;
    auto pn = tape.param(student.params());
    auto x_node = tape.constant(Tensor({1, d}, x_tilde));
    std::vector<world::ConceptPrompt> yp = {prompt_y};
    std::vector<world::ConceptPrompt> np = {world::ConceptPrompt::null()};
    std::vector<double> al = {alpha};
    auto pred = student.forward_on_tape(tape, pn, x_node, al, yp);
    auto tparams = tape.constant(
        Tensor({teacher.params().size()}, teacher.params().values()));

    GradientTape::VarId total = GradientTape::invalid;
    for (std::size_t k = 0; k < n_eps; ++k) {
        std::vector<double> ek(eps.begin() + k * d, eps.begin() + (k + 1) * d);
        auto ek_node = tape.constant(Tensor({1, d}, std::move(ek)));
        // x_t = x_tilde + sqrt(1-abar)(eps - pred); the teacher sees the
        // student through this input
        auto xt = tape.add_scaled(x_node, 1.0, tape.sub(ek_node, pred), sb);
        auto c = teacher.forward_on_tape(tape, tparams, xt, al, yp);
        auto u = teacher.forward_on_tape(tape, tparams, xt, al, np);
        auto half = tape.scale(tape.sum_sq(tape.sub(c, u)), 0.5);
        total = total == GradientTape::invalid ? half : tape.add(total, half);
    }
    auto loss = tape.scale(total, 1.0 / static_cast<double>(n_eps));
    tape.backward(loss);
    return tape.grad(pn).data;
}

namespace {

// mean teacher CFG gap over the shared draws, with the student's
// prediction held constant when building x_t
std::vector<double> mean_teacher_gap(const DenoiserModel& student,
                                     const DenoiserModel& teacher,
                                     const std::vector<double>& x_tilde,
                                     double alpha, double sb,
                                     const world::ConceptPrompt& prompt_y,
                                     std::size_t n_eps, std::uint64_t seed) {
    const std::size_t d = student.arch().dim;
    auto pred = student.predict(x_tilde, alpha, prompt_y);
    auto eps = draw_eps(n_eps, d, seed);
    std::vector<double> gap(d, 0.0);
    for (std::size_t k = 0; k < n_eps; ++k) {
        std::vector<double> xt(d);
        for (std::size_t j = 0; j < d; ++j)
            xt[j] = x_tilde[j] + sb * (eps[k * d + j] - pred[j]);
        auto c = teacher.predict(xt, alpha, prompt_y);
        auto u = teacher.predict(xt, alpha, world::ConceptPrompt::null());
        for (std::size_t j = 0; j < d; ++j) gap[j] += c[j] - u[j];
    }
    for (auto& g : gap) g /= static_cast<double>(n_eps);
    return gap;
}

std::vector<double> gap_times_pred_grad(const DenoiserModel& student,
                                        const std::vector<double>& x_tilde,
                                        double alpha,
                                        const world::ConceptPrompt& prompt_y,
                                        const std::vector<double>& gap) {
    const std::size_t d = student.arch().dim;
    GradientTape tape;
    auto pn = tape.param(student.params());
    auto x_node = tape.constant(Tensor({1, d}, x_tilde));
    std::vector<world::ConceptPrompt> yp = {prompt_y};
    std::vector<double> al = {alpha};
    auto pred = student.forward_on_tape(tape, pn, x_node, al, yp);
    auto loss = tape.dot(tape.constant(Tensor({1, d}, gap)), pred);
    tape.backward(loss);
    return tape.grad(pn).data;
}

}  // namespace

std::vector<double> jacobian_free_gradient(
    const DenoiserModel& student, const DenoiserModel& teacher,
    const std::vector<double>& x_tilde, std::size_t t,
    const diff::NoiseSchedule& schedule, const world::ConceptPrompt& prompt_y,
    std::size_t n_eps, std::uint64_t seed) {
    if (prompt_y.is_null())
        throw std::invalid_argument(
            "jacobian_free_gradient: prompt must not be null");
    const double alpha = schedule.logsnr(t);
    const double sb = std::sqrt(1.0 - schedule.abar(t));
    auto gap = mean_teacher_gap(student, teacher, x_tilde, alpha, sb, prompt_y,
                                n_eps, seed);
    auto g = gap_times_pred_grad(student, x_tilde, alpha, prompt_y, gap);
    for (auto& v : g) v *= -sb;  // w(t) = -sqrt(1 - abar_t)
    return g;
}

std::vector<double> dkl_recorder_gradient(
    const DenoiserModel& student, const DenoiserModel& teacher,
    const std::vector<double>& x_tilde, std::size_t t,
    const diff::NoiseSchedule& schedule, const world::ConceptPrompt& prompt_y,
    std::size_t n_eps, std::uint64_t seed) {
    if (prompt_y.is_null())
        throw std::invalid_argument(
            "dkl_recorder_gradient: prompt must not be null");
    const double alpha = schedule.logsnr(t);
    const double sb = std::sqrt(1.0 - schedule.abar(t));
    auto gap = mean_teacher_gap(student, teacher, x_tilde, alpha, sb, prompt_y,
                                n_eps, seed);
    return gap_times_pred_grad(student, x_tilde, alpha, prompt_y, gap);
}

namespace {

diff::DenoiserModel run_core(const DenoiserModel& teacher,
                             const world::ConceptWorld& world,
                             std::vector<ForgetSet> sets,
                             const UnlearnConfig& config,
                             UnlearnRunReport* report,
                             const SnapshotFn& snapshot) {
    validate(config);
    if (sets.empty()) throw std::invalid_argument("run_unlearn: no targets");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t d = teacher.arch().dim;
    const std::size_t B = config.batch_size;

    DenoiserModel student = teacher;
    DenoiserModel ema = teacher;  // sdd trajectory model
    auto opt = num::OptimizerState::adam_state(config.learning_rate,
                                               student.params().size());
    auto schedule = diff::NoiseSchedule::cosine();

    if (report) {
        report->loss_curve.clear();
        report->snapshot_steps.clear();
    }
    auto maybe_snapshot = [&](std::size_t step) {
        if (!snapshot) return;
        if (config.snapshot_every == 0) return;
        if (step % config.snapshot_every != 0 && step != config.steps) return;
        snapshot(step, student);
        if (report) report->snapshot_steps.push_back(step);
    };
    maybe_snapshot(0);

    std::vector<int> targets;
    for (const auto& s : sets) targets.push_back(*s.target.a);

    // MiM-MU and SDD fine-tune only the conditioning pathway (the
    // attribute-embedding tables); the trunk keeps the teacher's
    // weights, so the erasure is carried entirely by the prompt tokens
    // and generalizes to every prompt mentioning the target.
    // Retargeting fine-tunes the full network (its retain term exists to
    // repair the resulting collateral drift). MiM-MU additionally keeps
    // the null-token rows frozen: its reference is the frozen teacher's
    // unconditional branch, so the concept row absorbs the whole edit
    // and the student's unconditional branch never moves. SDD's own
    // unconditional branch is part of its loss and drifts with it.
    const bool embeddings_only = config.method != Method::retarget;
    const auto& slice_a = student.params().slice("emb_a");
    const auto& slice_b = student.params().slice("emb_b");
    const std::size_t cond_end = slice_b.offset + slice_b.size();
    const std::size_t null_a_at = slice_a.offset + (slice_a.rows - 1) *
                                                       slice_a.cols;
    const std::size_t null_b_at = slice_b.offset + (slice_b.rows - 1) *
                                                       slice_b.cols;

    for (std::size_t step = 0; step < config.steps; ++step) {
        const ForgetSet& fs = sets[step % sets.size()];
        Rng rng(num::derive_seed(config.seed, {0x756c, step}));
        std::vector<double> x(B * d), eps(B * d);
        std::vector<std::size_t> t(B);
        for (std::size_t i = 0; i < B; ++i) {
            const auto& s = fs.samples[rng.uniform_index(fs.samples.size())];
            std::copy(s.x.begin(), s.x.end(), x.begin() + i * d);
            t[i] = 1 + rng.uniform_index(schedule.T());
            for (std::size_t j = 0; j < d; ++j) eps[i * d + j] = rng.normal();
        }

        LossGrad lg;
        switch (config.method) {
            case Method::mim_mu:
                lg = mim_mu_loss(student, teacher, x, t, eps, schedule,
                                 fs.target, config.mim_target);
                break;
            case Method::sdd:
                lg = sdd_loss(student, ema, schedule, t, fs.target,
                              config.gamma,
                              num::derive_seed(config.seed, {0x7373, step}));
                break;
            case Method::retarget: {
                std::vector<world::LabeledSample> retain;
                retain.reserve(config.retain_batch);
                std::size_t tries = 0;
                while (retain.size() < config.retain_batch) {
                    int a = static_cast<int>(rng.uniform_index(
                        static_cast<std::size_t>(world.n_a())));
                    if (std::find(targets.begin(), targets.end(), a) !=
                        targets.end()) {
                        if (++tries > 1000 * config.retain_batch)
                            throw std::runtime_error(
                                "run_unlearn: no retain cells available");
                        continue;
                    }
                    int b = static_cast<int>(rng.uniform_index(
                        static_cast<std::size_t>(world.n_b())));
                    auto cell = world.sample(
                        world::ConceptPrompt::both(a, b), 1,
                        num::derive_seed(config.seed,
                                         {0x7274, step, retain.size()}));
                    retain.push_back(cell[0]);
                }
                std::vector<std::size_t> rt(config.retain_batch);
                std::vector<double> reps(config.retain_batch * d);
                for (std::size_t i = 0; i < config.retain_batch; ++i) {
                    rt[i] = 1 + rng.uniform_index(schedule.T());
                    for (std::size_t j = 0; j < d; ++j)
                        reps[i * d + j] = rng.normal();
                }
                auto anchor = config.anchor_a
                                  ? world::ConceptPrompt::only_a(
                                        *config.anchor_a)
                                  : world::ConceptPrompt::null();
                lg = retarget_loss(student, teacher, x, t, eps, retain, rt,
                                   reps, schedule, fs.target, anchor);
                break;
            }
        }
        if (!std::isfinite(lg.value))
            throw std::runtime_error("run_unlearn: non-finite loss at step " +
                                     std::to_string(step));
        if (embeddings_only) {
            std::fill(lg.grad.begin() + static_cast<std::ptrdiff_t>(cond_end),
                      lg.grad.end(), 0.0);
            if (config.method == Method::mim_mu) {
                std::fill_n(lg.grad.begin() +
                                static_cast<std::ptrdiff_t>(null_a_at),
                            slice_a.cols, 0.0);
                std::fill_n(lg.grad.begin() +
                                static_cast<std::ptrdiff_t>(null_b_at),
                            slice_b.cols, 0.0);
            }
        }
        num::optimizer_step(student.params(), lg.grad, opt);
        if (config.method == Method::sdd)
            num::ema_update(ema.params(), student.params(), config.ema_decay);
        if (config.method == Method::mim_mu && config.refresh_every > 0 &&
            (step + 1) % config.refresh_every == 0) {
            // refresh mode: resample the forget set from the student's own
            // conditional generations, per B-cell so labels stay meaningful
            ForgetSet& mut = sets[step % sets.size()];
            for (int b = 0; b < world.n_b(); ++b) {
                std::vector<std::size_t> idx;
                for (std::size_t i = 0; i < mut.samples.size(); ++i)
                    if (mut.samples[i].label_b == b) idx.push_back(i);
                if (idx.empty()) continue;
                auto gen = diff::sample(
                    student, schedule,
                    world::ConceptPrompt::both(*mut.target.a, b),
                    config.gamma, idx.size(),
                    num::derive_seed(config.seed,
                                     {0x7266, step,
                                      static_cast<std::uint64_t>(b)}));
                for (std::size_t i = 0; i < idx.size(); ++i)
                    mut.samples[idx[i]].x = gen[i];
            }
        }
        if (report) report->loss_curve.push_back(lg.value);
        maybe_snapshot(step + 1);
    }

    if (report) {
        report->wall_clock_ms =
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - start)
                .count();
    }
    return student;
}

}  // namespace

diff::DenoiserModel run_unlearn(const DenoiserModel& teacher,
                                const world::ConceptWorld& world,
                                const ForgetSet& forget,
                                const UnlearnConfig& config,
                                UnlearnRunReport* report,
                                const SnapshotFn& snapshot) {
    if (forget.samples.empty() || !forget.target.a)
        throw std::invalid_argument("run_unlearn: malformed forget set");
    return run_core(teacher, world, {forget}, config, report, snapshot);
}

diff::DenoiserModel multi_concept_unlearn(const DenoiserModel& teacher,
                                          const world::ConceptWorld& world,
                                          const std::vector<int>& targets,
                                          std::size_t per_b,
                                          const UnlearnConfig& config,
                                          UnlearnRunReport* report,
                                          const SnapshotFn& snapshot) {
    if (targets.empty())
        throw std::invalid_argument("multi_concept_unlearn: no targets");
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (std::size_t j = i + 1; j < targets.size(); ++j)
            if (targets[i] == targets[j])
                throw std::invalid_argument(
                    "multi_concept_unlearn: duplicate target");
    std::vector<ForgetSet> sets;
    for (std::size_t i = 0; i < targets.size(); ++i)
        sets.push_back(build_forget_set(
            world, targets[i], per_b,
            num::derive_seed(config.seed, {0x6d63, i})));
    return run_core(teacher, world, std::move(sets), config, report, snapshot);
}

}  // namespace mimmu::unlearn
