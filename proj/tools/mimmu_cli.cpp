// Operator entry point: world construction, pretraining, unlearning,
// estimation and protocol runs, driven by one JSON config. Every
// artifact is content-hashed and write-once, so reruns either reproduce
// bytes exactly or fail loudly.

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mimmu/diffusion/checkpoint.hpp"
#include "mimmu/diffusion/sampler.hpp"
#include "mimmu/diffusion/train.hpp"
#include "mimmu/evalharness/eval.hpp"
#include "mimmu/infotheory/estimators.hpp"
#include "mimmu/numerics/rng.hpp"
#include "mimmu/unlearn/unlearn.hpp"
#include "mimmu/world/world.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mimmu;

namespace {

constexpr const char* kToolVersion = "mimmu 1.0.0";

constexpr int kExitConfig = 2;    // config missing, unparsable, or invalid
constexpr int kExitArtifact = 3;  // artifact missing, conflicting, or stale
constexpr int kExitNumerical = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

std::string timestamp_utc() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ArtifactError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Holds the out-directory lock for the lifetime of one command.
class DirLock {
   public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw ArtifactError("output directory is locked: " +
                                path_.string());
        ::close(fd);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

   private:
    fs::path path_;
};

// One command run: effective config, output directory, digest index,
// manifest bookkeeping.
struct Ctx {
    json cfg;
    fs::path out;
    std::uint64_t seed = 0;
    std::string command;
    json inputs = json::object();
    std::vector<std::string> outputs;
    std::string started;

    fs::path index_path() const { return out / "digests.json"; }

    json load_index() const {
        if (!fs::exists(index_path())) return json::object();
        return json::parse(read_file(index_path()));
    }

    void store_index(const json& idx) const {
        std::ofstream o(index_path(), std::ios::binary | std::ios::trunc);
        o << idx.dump(2) << "\n";
    }

    // Consume an artifact: must exist, and must match the digest the
    // producing command recorded.
    std::string require(const std::string& name) {
        fs::path p = out / name;
        if (!fs::exists(p))
            throw ArtifactError("missing artifact: " + p.string());
        auto bytes = read_file(p);
        auto digest = hex64(fnv1a64(bytes));
        auto idx = load_index();
        if (idx.contains(name) && idx[name].get<std::string>() != digest)
            throw ArtifactError("digest mismatch for " + p.string());
        inputs[name] = digest;
        return bytes;
    }

    // Produce an artifact: write-once per content. A rerun emitting the
    // same bytes passes; diverging content is a hard conflict.
    void emit(const std::string& name, const std::string& bytes) {
        fs::path p = out / name;
        auto digest = hex64(fnv1a64(bytes));
        if (fs::exists(p)) {
            if (read_file(p) != bytes)
                throw ArtifactError("artifact conflict (exists with "
                                    "different content): " +
                                    p.string());
        } else {
            std::ofstream o(p, std::ios::binary | std::ios::trunc);
            if (!o) throw ArtifactError("cannot write " + p.string());
            o << bytes;
        }
        auto idx = load_index();
        idx[name] = digest;
        store_index(idx);
        outputs.push_back(name);
    }

    void write_manifest() const {
        json m;
        m["command"] = command;
        m["tool_version"] = kToolVersion;
        m["config_digest"] = hex64(fnv1a64(cfg.dump()));
        m["inputs"] = inputs;
        json outs = json::array();
        auto idx = load_index();
        for (const auto& name : outputs) {
            json e;
            e["name"] = name;
            e["digest"] = idx[name];
            outs.push_back(e);
        }
        m["outputs"] = outs;
        m["started"] = started;
        m["finished"] = timestamp_utc();
        std::ofstream o(out / (command + ".manifest.json"),
                        std::ios::binary | std::ios::trunc);
        o << m.dump(2) << "\n";
    }
};

json default_config() {
    return json::parse(R"({
  "version": 1,
  "seed": 0,
  "out": "runs/default",
  "world": {"kind": "default"},
  "schedule": {"kind": "cosine", "T": 200},
  "arch": {"dim": 2, "hidden": [128, 128, 128],
           "time_embed_dim": 32, "attr_embed_dim": 16},
  "train": {"epochs": 30, "batches_per_epoch": 100, "batch_size": 64,
            "learning_rate": 1e-3, "dropout_a": 0.1, "dropout_b": 0.1},
  "unlearn": {"method": "mim_mu", "target_a": 0, "per_b": 25,
              "steps": 3000, "batch_size": 32, "learning_rate": 1e-2,
              "mim_target": "teacher_uncond", "ema_decay": 0.999,
              "gamma": 2.0, "anchor_a": null, "retain_batch": 0,
              "refresh_every": 0},
  "eval": {"n_per_cell": 200, "gamma": 2.0, "sw_projections": 128,
           "sw_samples": 2000, "mi_points": 8, "mi_n_eps": 32},
  "mi": {"kind": "nonneg", "checkpoint": "teacher.ckpt",
         "grid_nodes": 64, "alpha_lo": -10.0, "alpha_hi": 10.0,
         "n_eps": 64, "n_points": 16, "prompt_a": 0, "prompt_b": null},
  "sequential": {"targets": [0, 1, 2], "per_b": 25},
  "multi": {"targets": [0, 1], "per_b": 25},
  "relearn": {"data": "random_subset", "class_a": null, "epochs": 8,
              "batches_per_epoch": 50, "batch_size": 32,
              "learning_rate": 1e-3}
})");
}

void deep_merge(json& base, const json& over) {
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) &&
            base[it.key()].is_object())
            deep_merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

void apply_override(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value: " + kv);
    std::string key = kv.substr(0, eq);
    std::string val = kv.substr(eq + 1);
    std::string pointer = "/";
    for (char c : key) pointer += c == '.' ? '/' : c;
    json parsed;
    try {
        parsed = json::parse(val);
    } catch (const json::exception&) {
        parsed = val;  // bare strings pass through
    }
    try {
        cfg[json::json_pointer(pointer)] = parsed;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad override path: ") + e.what());
    }
}

void validate_config(const json& cfg) {
    if (!cfg.is_object()) throw ConfigError("config is not an object");
    if (!cfg.contains("version") || cfg["version"] != 1)
        throw ConfigError("unsupported config version");
    static const std::vector<std::string> known = {
        "version", "seed",  "out",     "world",      "schedule", "arch",
        "train",   "unlearn", "eval",  "mi",         "sequential",
        "multi",   "relearn"};
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("unknown config key: " + it.key());
    }
    if (!cfg["seed"].is_number_unsigned() && !cfg["seed"].is_number_integer())
        throw ConfigError("seed must be an integer");
    const auto& w = cfg.at("world");
    std::string kind = w.at("kind");
    if (kind != "default" && kind != "fine_grained" && kind != "grid")
        throw ConfigError("world.kind must be default|fine_grained|grid");
    if (cfg.at("schedule").at("kind") != "cosine")
        throw ConfigError("schedule.kind must be cosine");
    std::string method = cfg.at("unlearn").at("method");
    if (method != "mim_mu" && method != "sdd" && method != "retarget")
        throw ConfigError("unlearn.method must be mim_mu|sdd|retarget");
    std::string tgt = cfg.at("unlearn").at("mim_target");
    if (tgt != "teacher_uncond" && tgt != "gaussian" && tgt != "zero")
        throw ConfigError("unlearn.mim_target invalid");
    std::string mk = cfg.at("mi").at("kind");
    if (mk != "nonneg" && mk != "naive" && mk != "density")
        throw ConfigError("mi.kind must be nonneg|naive|density");
    std::string rd = cfg.at("relearn").at("data");
    if (rd != "class_wise" && rd != "random_subset")
        throw ConfigError("relearn.data invalid");
}

world::ConceptWorld build_world(const json& cfg) {
    const auto& w = cfg.at("world");
    std::string kind = w.at("kind");
    if (kind == "default") return world::default_world();
    if (kind == "fine_grained") return world::fine_grained_world();
    return world::build_grid_world(w.at("n_a"), w.at("n_b"),
                                   w.value("dim", 2), w.at("spacing"),
                                   w.at("sigma"));
}

diff::NoiseSchedule build_schedule(const json& cfg) {
    return diff::NoiseSchedule::cosine(cfg.at("schedule").at("T"));
}

diff::Architecture build_arch(const json& cfg,
                              const world::ConceptWorld& world) {
    const auto& a = cfg.at("arch");
    diff::Architecture arch;
    arch.dim = a.at("dim");
    arch.hidden = a.at("hidden").get<std::vector<std::size_t>>();
    arch.time_embed_dim = a.at("time_embed_dim");
    arch.attr_embed_dim = a.at("attr_embed_dim");
    arch.n_a = world.n_a();
    arch.n_b = world.n_b();
    if (arch.dim != world.dim())
        throw ConfigError("arch.dim does not match the world dimension");
    return arch;
}

unlearn::UnlearnConfig build_unlearn_config(const json& cfg,
                                            std::uint64_t seed) {
    const auto& u = cfg.at("unlearn");
    unlearn::UnlearnConfig c;
    std::string method = u.at("method");
    c.method = method == "mim_mu"  ? unlearn::Method::mim_mu
               : method == "sdd"   ? unlearn::Method::sdd
                                   : unlearn::Method::retarget;
    c.steps = u.at("steps");
    c.batch_size = u.at("batch_size");
    c.learning_rate = u.at("learning_rate");
    c.seed = num::derive_seed(seed, {0x756e});
    std::string tgt = u.at("mim_target");
    c.mim_target = tgt == "teacher_uncond" ? unlearn::MimTarget::teacher_uncond
                   : tgt == "gaussian"     ? unlearn::MimTarget::gaussian
                                           : unlearn::MimTarget::zero;
    c.ema_decay = u.at("ema_decay");
    c.gamma = u.at("gamma");
    if (!u.at("anchor_a").is_null()) c.anchor_a = u.at("anchor_a").get<int>();
    c.retain_batch = u.at("retain_batch");
    c.refresh_every = u.at("refresh_every");
    unlearn::validate(c);
    return c;
}

eval::EvalConfig build_eval_config(const json& cfg, std::uint64_t seed) {
    const auto& e = cfg.at("eval");
    eval::EvalConfig c;
    c.n_per_cell = e.at("n_per_cell");
    c.gamma = e.at("gamma");
    c.seed = num::derive_seed(seed, {0x6576});
    c.sw_projections = e.at("sw_projections");
    c.sw_samples = e.at("sw_samples");
    c.mi_points = e.at("mi_points");
    c.mi_n_eps = e.at("mi_n_eps");
    return c;
}

// save_checkpoint writes to a path; round-trip through a scratch file to
// get the exact bytes for the write-once store
std::string checkpoint_bytes(const Ctx& ctx, const diff::CheckpointMeta& meta,
                             const num::ParamVector& params) {
    fs::path tmp = ctx.out / ".ckpt.tmp";
    diff::save_checkpoint(tmp.string(), meta, params);
    auto bytes = read_file(tmp);
    fs::remove(tmp);
    return bytes;
}

diff::DenoiserModel load_model_artifact(Ctx& ctx, const std::string& name) {
    ctx.require(name);
    return diff::load_checkpoint((ctx.out / name).string()).model;
}

diff::CheckpointMeta make_meta(const json& cfg,
                               const diff::Architecture& arch,
                               const std::string& lineage) {
    diff::CheckpointMeta meta;
    meta.arch = arch;
    meta.schedule_kind = "cosine";
    meta.schedule_T = cfg.at("schedule").at("T");
    meta.lineage = lineage;
    return meta;
}

std::string json_arr(const std::vector<double>& v) {
    std::string out = "[";
    char buf[40];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        if (i) out += ",";
        out += buf;
    }
    return out + "]";
}

// Commands -----------------------------------------------------------

void cmd_world(Ctx& ctx) {
    auto w = build_world(ctx.cfg);
    ctx.emit("world.json", world::world_to_json(w));
}

void cmd_pretrain(Ctx& ctx) {
    auto w = world::world_from_json(ctx.require("world.json"));
    auto schedule = build_schedule(ctx.cfg);
    auto arch = build_arch(ctx.cfg, w);
    diff::DenoiserModel model(arch, num::derive_seed(ctx.seed, {0x696e}));
    const auto& t = ctx.cfg.at("train");
    diff::TrainConfig tc;
    tc.epochs = t.at("epochs");
    tc.batches_per_epoch = t.at("batches_per_epoch");
    tc.batch_size = t.at("batch_size");
    tc.learning_rate = t.at("learning_rate");
    tc.dropout_a = t.at("dropout_a");
    tc.dropout_b = t.at("dropout_b");
    tc.seed = num::derive_seed(ctx.seed, {0x7472});
    auto curve = diff::pretrain(model, w, schedule, tc);
    auto meta = make_meta(ctx.cfg, arch,
                          "pretrain seed=" + std::to_string(ctx.seed));
    ctx.emit("teacher.ckpt", checkpoint_bytes(ctx, meta, model.params()));
    ctx.emit("pretrain_curve.json", "{\"loss\":" + json_arr(curve) + "}\n");
}

void cmd_unlearn(Ctx& ctx) {
    auto w = world::world_from_json(ctx.require("world.json"));
    auto teacher = load_model_artifact(ctx, "teacher.ckpt");
    auto ucfg = build_unlearn_config(ctx.cfg, ctx.seed);
    int target = ctx.cfg.at("unlearn").at("target_a");
    std::size_t per_b = ctx.cfg.at("unlearn").at("per_b");
    auto fs_set = unlearn::build_forget_set(
        w, target, per_b, num::derive_seed(ctx.seed, {0x6673}));
    unlearn::UnlearnRunReport rep;
    auto student = unlearn::run_unlearn(teacher, w, fs_set, ucfg, &rep);
    auto meta = make_meta(ctx.cfg, teacher.arch(),
                          "unlearn target_a=" + std::to_string(target) +
                              " seed=" + std::to_string(ctx.seed));
    ctx.emit("student.ckpt", checkpoint_bytes(ctx, meta, student.params()));
    ctx.emit("unlearn_report.json",
             "{\"loss\":" + json_arr(rep.loss_curve) + "}\n");
}

void cmd_eval(Ctx& ctx) {
    auto w = world::world_from_json(ctx.require("world.json"));
    auto teacher = load_model_artifact(ctx, "teacher.ckpt");
    auto student = load_model_artifact(ctx, "student.ckpt");
    auto schedule = build_schedule(ctx.cfg);
    auto ecfg = build_eval_config(ctx.cfg, ctx.seed);
    std::vector<int> erased = {ctx.cfg.at("unlearn").at("target_a").get<int>()};
    auto rep = eval::evaluate(teacher, student, w, erased, schedule, ecfg);
    ctx.emit("eval_report.json", eval::report_json(rep) + "\n");
    ctx.emit("eval_report.csv", eval::report_csv(rep, "eval"));
}

void cmd_mi(Ctx& ctx) {
    auto w = world::world_from_json(ctx.require("world.json"));
    const auto& m = ctx.cfg.at("mi");
    auto model = load_model_artifact(ctx, m.at("checkpoint"));
    auto grid = info::LogSnrGrid::uniform(m.at("grid_nodes"),
                                          m.at("alpha_lo"), m.at("alpha_hi"));
    world::ConceptPrompt prompt;
    if (!m.at("prompt_a").is_null()) prompt.a = m.at("prompt_a").get<int>();
    if (!m.at("prompt_b").is_null()) prompt.b = m.at("prompt_b").get<int>();
    std::size_t n_points = m.at("n_points");
    std::size_t n_eps = m.at("n_eps");
    auto pts = w.sample(prompt.is_null() ? world::ConceptPrompt::null()
                                         : prompt,
                        n_points, num::derive_seed(ctx.seed, {0x6d70}));
    std::string kind = m.at("kind");
    std::string body;
    if (kind == "density") {
        double mean = 0.0;
        std::vector<double> per_point;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto est = info::neg_log_density(
                model, pts[i].x, prompt, grid, n_eps,
                num::derive_seed(ctx.seed, {0x6d71, i}));
            per_point.push_back(est.value);
            mean += est.value / static_cast<double>(pts.size());
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", mean);
        body = std::string("{\"kind\":\"density\",\"mean\":") + buf +
               ",\"per_point\":" + json_arr(per_point) + "}\n";
    } else {
        std::vector<std::vector<double>> xs;
        for (const auto& p : pts) xs.push_back(p.x);
        auto est = kind == "nonneg"
                       ? info::mi_nonneg_batch(
                             model, xs, prompt, grid, n_eps,
                             num::derive_seed(ctx.seed, {0x6d71}))
                       : info::mi_naive_batch(
                             model, xs, prompt, grid, n_eps,
                             num::derive_seed(ctx.seed, {0x6d71}));
        body = info::report_line(est, grid) + "\n";
    }
    ctx.emit("mi_report.json", body);
}

void cmd_sequential(Ctx& ctx) {
    auto w = world::world_from_json(ctx.require("world.json"));
    auto teacher = load_model_artifact(ctx, "teacher.ckpt");
    auto schedule = build_schedule(ctx.cfg);
    auto ucfg = build_unlearn_config(ctx.cfg, ctx.seed);
    auto ecfg = build_eval_config(ctx.cfg, ctx.seed);
    auto targets = ctx.cfg.at("sequential").at("targets").get<std::vector<int>>();
    std::size_t per_b = ctx.cfg.at("sequential").at("per_b");
    diff::DenoiserModel final_student = teacher;
    auto rep = eval::sequential_protocol(teacher, w, targets, ucfg, per_b,
                                         schedule, ecfg, &final_student);
    auto meta = make_meta(ctx.cfg, teacher.arch(),
                          "sequential seed=" + std::to_string(ctx.seed));
    ctx.emit("student_sequential.ckpt",
             checkpoint_bytes(ctx, meta, final_student.params()));
    ctx.emit("sequential_report.json", eval::report_json(rep) + "\n");
    ctx.emit("sequential_report.csv", eval::report_csv(rep));
}

void cmd_relearn(Ctx& ctx) {
    auto w = world::world_from_json(ctx.require("world.json"));
    auto student = load_model_artifact(ctx, "student.ckpt");
    auto schedule = build_schedule(ctx.cfg);
    auto ecfg = build_eval_config(ctx.cfg, ctx.seed);
    const auto& r = ctx.cfg.at("relearn");
    eval::RelearnConfig rc;
    rc.data = r.at("data") == "class_wise" ? eval::RelearnData::class_wise
                                           : eval::RelearnData::random_subset;
    if (!r.at("class_a").is_null()) rc.class_a = r.at("class_a").get<int>();
    rc.epochs = r.at("epochs");
    rc.batches_per_epoch = r.at("batches_per_epoch");
    rc.batch_size = r.at("batch_size");
    rc.learning_rate = r.at("learning_rate");
    rc.seed = num::derive_seed(ctx.seed, {0x726c});
    std::vector<int> erased = {ctx.cfg.at("unlearn").at("target_a").get<int>()};
    auto rep = eval::relearn_protocol(student, w, erased, schedule, rc, ecfg);
    ctx.emit("relearn_report.json", eval::report_json(rep) + "\n");
}

void cmd_multi(Ctx& ctx) {
    auto w = world::world_from_json(ctx.require("world.json"));
    auto teacher = load_model_artifact(ctx, "teacher.ckpt");
    auto schedule = build_schedule(ctx.cfg);
    auto ucfg = build_unlearn_config(ctx.cfg, ctx.seed);
    auto ecfg = build_eval_config(ctx.cfg, ctx.seed);
    auto targets = ctx.cfg.at("multi").at("targets").get<std::vector<int>>();
    std::size_t per_b = ctx.cfg.at("multi").at("per_b");
    auto student =
        unlearn::multi_concept_unlearn(teacher, w, targets, per_b, ucfg);
    auto rep = eval::evaluate(teacher, student, w, targets, schedule, ecfg);
    auto meta = make_meta(ctx.cfg, teacher.arch(),
                          "multi seed=" + std::to_string(ctx.seed));
    ctx.emit("student_multi.ckpt",
             checkpoint_bytes(ctx, meta, student.params()));
    ctx.emit("multi_report.json", eval::report_json(rep) + "\n");
}

void cmd_verify_grad(Ctx& ctx) {
    auto w = build_world(ctx.cfg);
    auto schedule = diff::NoiseSchedule::cosine(20);
    auto arch = diff::Architecture::tiny(w.n_a(), w.n_b());
    diff::DenoiserModel teacher(arch, num::derive_seed(ctx.seed, {1}));
    diff::DenoiserModel student(arch, num::derive_seed(ctx.seed, {2}));
    auto y = world::ConceptPrompt::only_a(0);
    std::vector<double> x_tilde = {0.3, -0.5};
    std::size_t t = 7, n_eps = 4;
    std::uint64_t seed = num::derive_seed(ctx.seed, {3});

    // exact gradient of the timestep MI vs central differences
    auto g = unlearn::full_mi_gradient(student, teacher, x_tilde, t, schedule,
                                       y, n_eps, seed);
    num::Rng rng(num::derive_seed(ctx.seed, {4}));
    auto v = rng.normal_vec(g.size());
    double gv = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gv += g[i] * v[i];
    double h = 1e-6;
    auto bump = [&](double dir) {
        diff::DenoiserModel m = student;
        for (std::size_t i = 0; i < v.size(); ++i)
            m.params()[i] += dir * h * v[i];
        return unlearn::mi_t_value(m, teacher, x_tilde, t, schedule, y, n_eps,
                                   seed);
    };
    double fd = (bump(1.0) - bump(-1.0)) / (2 * h);
    double res_full = std::abs(fd - gv) / std::max(1e-12, std::abs(gv));

    // jacobian-free direction is the recorder gradient scaled by
    // -sqrt(1 - abar_t)
    auto jf = unlearn::jacobian_free_gradient(student, teacher, x_tilde, t,
                                              schedule, y, n_eps, seed);
    auto dk = unlearn::dkl_recorder_gradient(student, teacher, x_tilde, t,
                                             schedule, y, n_eps, seed);
    double sb = std::sqrt(1.0 - schedule.abar(t));
    double res_jf = 0.0;
    for (std::size_t i = 0; i < jf.size(); ++i) {
        double want = -sb * dk[i];
        double den = std::max(1e-12, std::abs(want));
        res_jf = std::max(res_jf, std::abs(jf[i] - want) / den);
    }

    // recorder form of the erasure loss vs its taped gradient
    auto pts = w.sample(world::ConceptPrompt::null(), 4,
                        num::derive_seed(ctx.seed, {5}));
    std::vector<double> bx, beps;
    std::vector<std::size_t> bt;
    num::Rng brng(num::derive_seed(ctx.seed, {6}));
    for (const auto& s : pts) {
        bx.insert(bx.end(), s.x.begin(), s.x.end());
        bt.push_back(1 + brng.uniform_index(schedule.T()));
        for (std::size_t j = 0; j < w.dim(); ++j) beps.push_back(brng.normal());
    }
    auto lg = unlearn::mim_mu_loss(student, teacher, bx, bt, beps, schedule, y);
    auto ag = unlearn::mim_mu_analytic_gradient(student, teacher, bx, bt, beps,
                                                schedule, y);
    double res_rec = 0.0;
    for (std::size_t i = 0; i < ag.size(); ++i)
        res_rec = std::max(res_rec, std::abs(ag[i] - lg.grad[i]));

    bool pass = res_full < 1e-5 && res_jf < 1e-6 && res_rec < 1e-10;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "{\"full_vs_fd_rel\":%.17g,\"jacfree_vs_recorder_rel\":"
                  "%.17g,\"erasure_recorder_abs\":%.17g,\"pass\":%s}\n",
                  res_full, res_jf, res_rec, pass ? "true" : "false");
    std::cout << "full_vs_fd_rel " << res_full << "\n"
              << "jacfree_vs_recorder_rel " << res_jf << "\n"
              << "erasure_recorder_abs " << res_rec << "\n";
    ctx.emit("verify_grad.json", buf);
    if (!pass) throw std::runtime_error("gradient identity check failed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concept-erasure experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed_flag;
    std::string out_flag;
    int threads = 1;
    app.add_option("--config", config_path, "JSON config path");
    app.add_option("--set", overrides, "dotted-path override key=value");
    app.add_option("--seed", seed_flag, "global seed override");
    app.add_option("--out", out_flag, "output directory override");
    app.add_option("--threads", threads, "sampler worker threads");

    std::map<std::string, void (*)(Ctx&)> commands = {
        {"world", cmd_world},         {"pretrain", cmd_pretrain},
        {"unlearn", cmd_unlearn},     {"eval", cmd_eval},
        {"mi", cmd_mi},               {"sequential", cmd_sequential},
        {"relearn", cmd_relearn},     {"multi", cmd_multi},
        {"verify-grad", cmd_verify_grad}};
    // global flags may appear after the subcommand name
    for (auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        Ctx ctx;
        ctx.cfg = default_config();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config " + config_path);
            json user;
            try {
                user = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError(std::string("config parse error: ") +
                                  e.what());
            }
            deep_merge(ctx.cfg, user);
        }
        for (const auto& kv : overrides) apply_override(ctx.cfg, kv);
        if (seed_flag) ctx.cfg["seed"] = *seed_flag;
        if (!out_flag.empty()) ctx.cfg["out"] = out_flag;
        validate_config(ctx.cfg);
        ctx.seed = ctx.cfg["seed"].get<std::uint64_t>();

        fs::path out = ctx.cfg["out"].get<std::string>();
        if (out.is_relative()) {
            if (const char* root = std::getenv("MIMMU_OUT_ROOT"))
                out = fs::path(root) / out;
        }
        fs::create_directories(out);
        ctx.out = out;

        if (threads < 1) throw ConfigError("--threads must be positive");
        diff::set_sampler_threads(threads);

        ctx.command = app.get_subcommands().front()->get_name();
        ctx.started = timestamp_utc();

        DirLock lock(ctx.out);
        commands.at(ctx.command)(ctx);
        ctx.write_manifest();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return kExitConfig;
    } catch (const ArtifactError& e) {
        std::cerr << "error (artifact): " << e.what() << "\n";
        return kExitArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error (numerical): " << e.what() << "\n";
        return kExitNumerical;
    }
}
