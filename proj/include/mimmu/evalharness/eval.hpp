#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mimmu/diffusion/model.hpp"
#include "mimmu/diffusion/schedule.hpp"
#include "mimmu/infotheory/estimators.hpp"
#include "mimmu/unlearn/unlearn.hpp"
#include "mimmu/world/world.hpp"

namespace mimmu::eval {

// Per prompt cell: argmax counts of the Bayes classifier over generated
// samples. Each count vector sums to n.
struct CellCount {
    world::ConceptPrompt prompt;
    std::vector<std::size_t> counts_a;  // size n_a
    std::vector<std::size_t> counts_b;  // size n_b
    std::size_t n = 0;
};

struct EvalConfig {
    std::size_t n_per_cell = 200;
    double gamma = 2.0;
    std::uint64_t seed = 0;
    std::size_t sw_projections = 128;
    std::size_t sw_samples = 2000;
    std::size_t mi_points = 8;   // generated points per side of mi_drop
    std::size_t mi_n_eps = 32;
};

struct EvalReport {
    double ua = 0.0;
    double ira = 0.0;
    double cra = 0.0;
    std::optional<double> nra;  // fine-grained neighbor retention
    std::optional<double> ora;  // fine-grained off-axis retention
    double sw_distance = 0.0;
    double mi_drop = 0.0;
    bool mi_drop_applicable = true;
    std::vector<CellCount> cells;
    std::size_t n_per_cell = 0;
    std::uint64_t seed = 0;
};

// Fraction of conditional generations the Bayes oracle does NOT assign
// to the erased A-value, averaged over all B prompts (target_a, b).
// High is good: 1 means the concept never appears.
double unlearning_accuracy(const diff::NoisePredictor& model,
                           const world::ConceptWorld& world, int target_a,
                           const diff::NoiseSchedule& schedule, std::size_t n,
                           double gamma, std::uint64_t seed,
                           std::vector<CellCount>* cells = nullptr);

enum class RetainAxis { in_domain, cross_domain };

// in_domain: fraction of generations with the correct A-argmax over
// prompts (a, b) with a outside the erased set. cross_domain: correct
// B-argmax over those prompts plus the B-only prompts.
double retain_accuracy(const diff::NoisePredictor& model,
                       const world::ConceptWorld& world,
                       const std::vector<int>& erased_a, RetainAxis axis,
                       const diff::NoiseSchedule& schedule, std::size_t n,
                       double gamma, std::uint64_t seed,
                       std::vector<CellCount>* cells = nullptr);

// Average over random unit projections of the 1-D 2-Wasserstein distance
// between the projected empirical distributions. Symmetric; handles
// unequal sizes via the step quantile functions.
double sliced_wasserstein(const std::vector<std::vector<double>>& set_a,
                          const std::vector<std::vector<double>>& set_b,
                          std::size_t n_projections, std::uint64_t seed);

struct MiDropResult {
    double value = 0.0;  // clamped to [0, 1]
    bool applicable = true;  // false when the reference MI is in the noise
    double teacher_mi = 0.0;  // teacher's A-information on its own generations
    double student_mi = 0.0;  // student's, on its own generations
};

// 1 - student_mi / teacher_mi, each model scored as its own
// discriminator on its own target-prompt generations.
MiDropResult mi_drop(const diff::DenoiserModel& teacher,
                     const diff::DenoiserModel& student,
                     const world::ConceptWorld& world, int target_a,
                     const diff::NoiseSchedule& schedule,
                     const info::LogSnrGrid& grid, const EvalConfig& config);

// Full metric sweep of a student against its teacher.
EvalReport evaluate(const diff::DenoiserModel& teacher,
                    const diff::DenoiserModel& student,
                    const world::ConceptWorld& world,
                    const std::vector<int>& erased_a,
                    const diff::NoiseSchedule& schedule,
                    const EvalConfig& config);

struct SequentialReport {
    std::vector<int> targets;
    // ua[i][j]: accuracy for target i measured after request j; defined
    // for j >= i only, earlier entries are -1.
    std::vector<std::vector<double>> ua;
    std::vector<double> ra;  // mean of IRA and CRA after each request
    // rebound[i][j] set when ua[i][j] < ua[i][j-1] - 0.05
    std::vector<std::vector<bool>> rebound;
    bool any_rebound = false;
};

// Applies run_unlearn once per target on the evolving student; retain
// prompts exclude every concept erased so far.
SequentialReport sequential_protocol(const diff::DenoiserModel& teacher,
                                     const world::ConceptWorld& world,
                                     const std::vector<int>& targets,
                                     const unlearn::UnlearnConfig& ucfg,
                                     std::size_t forget_per_b,
                                     const diff::NoiseSchedule& schedule,
                                     const EvalConfig& ecfg,
                                     diff::DenoiserModel* final_student =
                                         nullptr);

enum class RelearnData { class_wise, random_subset };

struct RelearnConfig {
    RelearnData data = RelearnData::random_subset;
    std::optional<int> class_a;  // class_wise only; must not be erased
    std::size_t epochs = 8;
    std::size_t batches_per_epoch = 50;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct RelearnReport {
    RelearnData data = RelearnData::random_subset;
    std::vector<double> ua_per_epoch;  // index 0 is before fine-tuning
    double delta_ua = 0.0;             // ua[0] - ua[final]; positive = resurgence
};

// Fine-tunes the student with the standard denoising loss on data that
// excludes the erased concepts, recording UA after every epoch.
RelearnReport relearn_protocol(const diff::DenoiserModel& student,
                               const world::ConceptWorld& world,
                               const std::vector<int>& erased_a,
                               const diff::NoiseSchedule& schedule,
                               const RelearnConfig& rcfg,
                               const EvalConfig& ecfg);

struct BreakdownReport {
    std::vector<std::size_t> steps;
    // per step, per method; method 0 = distillation toward the teacher
    // unconditional, method 1 = self-distillation
    std::vector<std::vector<double>> ua;   // [method][step index]
    std::vector<std::vector<double>> ira;
    std::vector<std::vector<double>> cra;
    std::vector<double> sdd_uncond_drift;  // per step, vs the teacher
};

// Paired-seed probe: both methods run with identical configs and
// snapshot cadence; metrics recorded at every grid step. Non-null
// final_* pointers receive the fully trained students.
BreakdownReport breakdown_probe(const diff::DenoiserModel& teacher,
                                const world::ConceptWorld& world, int target_a,
                                std::size_t step_stride, std::size_t n_steps,
                                const unlearn::UnlearnConfig& ucfg,
                                std::size_t forget_per_b,
                                const diff::NoiseSchedule& schedule,
                                const EvalConfig& ecfg,
                                diff::DenoiserModel* final_mim = nullptr,
                                diff::DenoiserModel* final_sdd = nullptr);

// Serialization: fixed field order, 17 significant digits, so identical
// inputs produce identical bytes.
std::string report_json(const EvalReport& r);
std::string report_json(const SequentialReport& r);
std::string report_json(const RelearnReport& r);
std::string report_json(const BreakdownReport& r);
// One row per metric cell: protocol,method,request,metric,value,seed.
std::string report_csv(const EvalReport& r, const std::string& protocol);
std::string report_csv(const SequentialReport& r);

}  // namespace mimmu::eval
