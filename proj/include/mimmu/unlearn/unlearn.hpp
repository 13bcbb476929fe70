#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mimmu/diffusion/model.hpp"
#include "mimmu/diffusion/schedule.hpp"
#include "mimmu/world/world.hpp"

namespace mimmu::unlearn {

// Erasure training pairs: samples of the target A-value spanning every
// B-value, plus the conditioning prompt (A set, B null).
struct ForgetSet {
    std::vector<world::LabeledSample> samples;
    world::ConceptPrompt target;
};

// Samples per_b points from every (target_a, b) cell.
ForgetSet build_forget_set(const world::ConceptWorld& world, int target_a,
                           std::size_t per_b, std::uint64_t seed);

enum class Method { mim_mu, sdd, retarget };

// The y-independent distillation target of the erasure loss. The
// teacher's unconditional prediction is the default; the alternatives
// exist for the optimal-target comparison.
enum class MimTarget { teacher_uncond, gaussian, zero };

struct UnlearnConfig {
    Method method = Method::mim_mu;
    std::size_t steps = 3000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-2;  // embedding-table updates move O(1) rows
    std::uint64_t seed = 0;
    MimTarget mim_target = MimTarget::teacher_uncond;
    double ema_decay = 0.999;  // sdd trajectory model
    double gamma = 2.0;        // sdd partial-sampling guidance
    std::optional<int> anchor_a;   // retarget anchor; nullopt = null token
    std::size_t retain_batch = 0;  // retarget only; must be 0 otherwise
    std::size_t refresh_every = 0;  // mim_mu: regenerate the forget set
                                    // from the student every n steps; 0 =
                                    // fixed set
    std::size_t snapshot_every = 0;  // 0 = no snapshots
};

void validate(const UnlearnConfig& config);

struct LossGrad {
    double value = 0.0;
    std::vector<double> grad;  // w.r.t. student parameters
};

// |eps_student(x_t|y) - target|^2 averaged over the batch, teacher branch
// constant. x and eps are row-major batch x d; one timestep per row.
LossGrad mim_mu_loss(const diff::DenoiserModel& student,
                     const diff::DenoiserModel& teacher,
                     const std::vector<double>& x,
                     const std::vector<std::size_t>& t,
                     const std::vector<double>& eps,
                     const diff::NoiseSchedule& schedule,
                     const world::ConceptPrompt& prompt_y,
                     MimTarget target = MimTarget::teacher_uncond);

// Per-row conditioning prompt variant.
LossGrad mim_mu_loss(const diff::DenoiserModel& student,
                     const diff::DenoiserModel& teacher,
                     const std::vector<double>& x,
                     const std::vector<std::size_t>& t,
                     const std::vector<double>& eps,
                     const diff::NoiseSchedule& schedule,
                     const std::vector<world::ConceptPrompt>& prompts_y,
                     MimTarget target = MimTarget::teacher_uncond);

// The same gradient written as (2/B) * gap^T dpred/dtheta with the gap
// held constant; equals mim_mu_loss().grad identically.
std::vector<double> mim_mu_analytic_gradient(
    const diff::DenoiserModel& student, const diff::DenoiserModel& teacher,
    const std::vector<double>& x, const std::vector<std::size_t>& t,
    const std::vector<double>& eps, const diff::NoiseSchedule& schedule,
    const world::ConceptPrompt& prompt_y,
    MimTarget target = MimTarget::teacher_uncond);

// Self-distillation loss on partially denoised latents drawn from the
// EMA model; the unconditional branch is a constant target.
LossGrad sdd_loss(const diff::DenoiserModel& student,
                  const diff::DenoiserModel& ema_model,
                  const diff::NoiseSchedule& schedule,
                  const std::vector<std::size_t>& t,
                  const world::ConceptPrompt& prompt_y, double gamma,
                  std::uint64_t seed);

// Per-row prompt variant; row i partial-samples under prompts_y[i].
LossGrad sdd_loss(const diff::DenoiserModel& student,
                  const diff::DenoiserModel& ema_model,
                  const diff::NoiseSchedule& schedule,
                  const std::vector<std::size_t>& t,
                  const std::vector<world::ConceptPrompt>& prompts_y,
                  double gamma, std::uint64_t seed);

// Anchor-retargeting baseline: unlearning term toward the teacher's
// anchor prediction plus a retaining term on retain data, teachers
// constant throughout.
LossGrad retarget_loss(const diff::DenoiserModel& student,
                       const diff::DenoiserModel& teacher,
                       const std::vector<double>& forget_x,
                       const std::vector<std::size_t>& forget_t,
                       const std::vector<double>& forget_eps,
                       const std::vector<world::LabeledSample>& retain,
                       const std::vector<std::size_t>& retain_t,
                       const std::vector<double>& retain_eps,
                       const diff::NoiseSchedule& schedule,
                       const world::ConceptPrompt& prompt_y,
                       const world::ConceptPrompt& anchor_prompt);

// Timestep MI of the teacher measured on the student's one-step denoise
// of x_tilde, averaged over fresh channel draws. The scalar whose exact
// parameter gradient full_mi_gradient computes.
double mi_t_value(const diff::DenoiserModel& student,
                  const diff::DenoiserModel& teacher,
                  const std::vector<double>& x_tilde, std::size_t t,
                  const diff::NoiseSchedule& schedule,
                  const world::ConceptPrompt& prompt_y, std::size_t n_eps,
                  std::uint64_t seed);

// Exact gradient of mi_t_value w.r.t. the student, differentiating
// through the frozen teacher's input (its Jacobian). Verification path
// only: rejects students above 10^4 parameters.
std::vector<double> full_mi_gradient(const diff::DenoiserModel& student,
                                     const diff::DenoiserModel& teacher,
                                     const std::vector<double>& x_tilde,
                                     std::size_t t,
                                     const diff::NoiseSchedule& schedule,
                                     const world::ConceptPrompt& prompt_y,
                                     std::size_t n_eps, std::uint64_t seed);

// Drops the teacher-Jacobian path: -sqrt(1-abar_t) * E[gap^T dpred/dtheta]
// with the teacher's CFG gap held constant.
std::vector<double> jacobian_free_gradient(
    const diff::DenoiserModel& student, const diff::DenoiserModel& teacher,
    const std::vector<double>& x_tilde, std::size_t t,
    const diff::NoiseSchedule& schedule, const world::ConceptPrompt& prompt_y,
    std::size_t n_eps, std::uint64_t seed);

// Recorder gradient of the KL surrogate: E[gap^T dpred/dtheta] with the
// same draws, so jacobian_free = -sqrt(1-abar_t) times this vector.
std::vector<double> dkl_recorder_gradient(
    const diff::DenoiserModel& student, const diff::DenoiserModel& teacher,
    const std::vector<double>& x_tilde, std::size_t t,
    const diff::NoiseSchedule& schedule, const world::ConceptPrompt& prompt_y,
    std::size_t n_eps, std::uint64_t seed);

struct UnlearnRunReport {
    std::vector<double> loss_curve;  // per step
    std::vector<std::size_t> snapshot_steps;
    double wall_clock_ms = 0.0;
};

using SnapshotFn =
    std::function<void(std::size_t step, const diff::DenoiserModel& student)>;

// Student initialized from the teacher, then per step: batch from the
// forget set, uniform t, fresh eps, configured loss, Adam step.
// MiM-MU and SDD update only the attribute-embedding tables (the
// conditioning pathway), which localizes the erasure to the target
// token and leaves the trunk at the teacher's weights; retargeting
// updates the full network. Deterministic per seed. MiM-MU and SDD
// never touch retain data.
diff::DenoiserModel run_unlearn(const diff::DenoiserModel& teacher,
                                const world::ConceptWorld& world,
                                const ForgetSet& forget,
                                const UnlearnConfig& config,
                                UnlearnRunReport* report = nullptr,
                                const SnapshotFn& snapshot = {});

// Round-robin over per-target forget sets; a single target reproduces
// run_unlearn exactly at the same seed.
diff::DenoiserModel multi_concept_unlearn(const diff::DenoiserModel& teacher,
                                          const world::ConceptWorld& world,
                                          const std::vector<int>& targets,
                                          std::size_t per_b,
                                          const UnlearnConfig& config,
                                          UnlearnRunReport* report = nullptr,
                                          const SnapshotFn& snapshot = {});

}  // namespace mimmu::unlearn
