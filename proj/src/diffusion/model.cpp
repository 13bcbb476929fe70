#include "mimmu/diffusion/model.hpp"

#include <cmath>
#include <stdexcept>

#include "mimmu/numerics/nn_kernels.hpp"
#include "mimmu/numerics/rng.hpp"

namespace mimmu::diff {

void time_embedding(double alpha, std::size_t k, double* out) {
    const std::size_t half = k / 2;
    const double w_min = 0.05, w_max = 4.0;
    for (std::size_t i = 0; i < half; ++i) {
        double frac = half > 1 ? static_cast<double>(i) /
                                     static_cast<double>(half - 1)
                               : 0.0;
        double w = w_min * std::pow(w_max / w_min, frac);
        out[2 * i] = std::sin(w * alpha);
        out[2 * i + 1] = std::cos(w * alpha);
    }
}

DenoiserModel::DenoiserModel(Architecture arch, std::uint64_t seed)
    : arch_(std::move(arch)) {
    build_layout();
    num::Rng rng(num::derive_seed(seed, {0x1217}));
    for (const auto& s : params_.layout()) {
        double scale;
        if (s.name.rfind("emb_", 0) == 0)
            scale = 0.5;
        else if (s.name[0] == 'b')
            scale = 0.0;
        else
            scale = 1.0 / std::sqrt(static_cast<double>(s.cols));
        for (std::size_t i = 0; i < s.size(); ++i)
            params_[s.offset + i] = scale == 0.0 ? 0.0 : scale * rng.normal();
    }
}

DenoiserModel::DenoiserModel(Architecture arch, num::ParamVector params)
    : arch_(std::move(arch)) {
    build_layout();
    if (params.size() != params_.size())
        throw std::invalid_argument("DenoiserModel: parameter count mismatch");
    params_.values() = params.values();
}

void DenoiserModel::build_layout() {
    params_ = num::ParamVector();
    params_.add_slice("emb_a", static_cast<std::size_t>(arch_.n_a) + 1,
                      arch_.attr_embed_dim);
    params_.add_slice("emb_b", static_cast<std::size_t>(arch_.n_b) + 1,
                      arch_.attr_embed_dim);
    std::size_t in = arch_.input_dim();
    for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
        std::size_t out = arch_.hidden[l];
        params_.add_slice("W" + std::to_string(l), out, in);
        params_.add_slice("b" + std::to_string(l), out);
        in = out;
    }
    params_.add_slice("W_out", arch_.dim, in);
    params_.add_slice("b_out", arch_.dim);
}

void DenoiserModel::validate_prompt(const world::ConceptPrompt& p) const {
    if (p.a && (*p.a < 0 || *p.a >= arch_.n_a))
        throw std::out_of_range("DenoiserModel: prompt a out of range");
    if (p.b && (*p.b < 0 || *p.b >= arch_.n_b))
        throw std::out_of_range("DenoiserModel: prompt b out of range");
}

std::vector<double> DenoiserModel::predict(const std::vector<double>& x_alpha,
                                           double alpha,
                                           const world::ConceptPrompt& prompt)
    const {
    return predict_batch(x_alpha, {alpha}, {prompt});
}

std::vector<double> DenoiserModel::predict_batch(
    const std::vector<double>& x_alpha, const std::vector<double>& alphas,
    const std::vector<world::ConceptPrompt>& prompts) const {
    const std::size_t d = arch_.dim;
    const std::size_t batch = alphas.size();
    if (x_alpha.size() != batch * d || prompts.size() != batch)
        throw std::invalid_argument("DenoiserModel::predict_batch: shape");
    const std::size_t in = arch_.input_dim();
    const std::size_t e = arch_.attr_embed_dim;
    const std::size_t k = arch_.time_embed_dim;
    const double* pa = params_.data() + params_.slice("emb_a").offset;
    const double* pb = params_.data() + params_.slice("emb_b").offset;

    std::vector<double> buf(batch * in);
    for (std::size_t r = 0; r < batch; ++r) {
        validate_prompt(prompts[r]);
        double* row = buf.data() + r * in;
        for (std::size_t i = 0; i < d; ++i) row[i] = x_alpha[r * d + i];
        time_embedding(alphas[r], k, row + d);
        std::size_t ia = prompts[r].a ? static_cast<std::size_t>(*prompts[r].a)
                                      : null_a();
        std::size_t ib = prompts[r].b ? static_cast<std::size_t>(*prompts[r].b)
                                      : null_b();
        for (std::size_t i = 0; i < e; ++i) row[d + k + i] = pa[ia * e + i];
        for (std::size_t i = 0; i < e; ++i) row[d + k + e + i] = pb[ib * e + i];
    }

    std::vector<double> cur = std::move(buf), next;
    std::size_t width = in;
    for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
        const auto& W = params_.slice("W" + std::to_string(l));
        const auto& b = params_.slice("b" + std::to_string(l));
        next.assign(batch * W.rows, 0.0);
        num::kernels::affine_forward(cur.data(), params_.data() + W.offset,
                                     params_.data() + b.offset, next.data(),
                                     batch, width, W.rows);
        num::kernels::silu_forward(next.data(), next.data(), next.size());
        cur = std::move(next);
        width = W.rows;
    }
    const auto& Wo = params_.slice("W_out");
    const auto& bo = params_.slice("b_out");
    std::vector<double> out(batch * d, 0.0);
    num::kernels::affine_forward(cur.data(), params_.data() + Wo.offset,
                                 params_.data() + bo.offset, out.data(), batch,
                                 width, d);
    return out;
}

num::GradientTape::VarId DenoiserModel::forward_on_tape(
    num::GradientTape& tape, num::GradientTape::VarId params_node,
    num::GradientTape::VarId x_node, const std::vector<double>& alphas,
    const std::vector<world::ConceptPrompt>& prompts) const {
    using num::Tensor;
    const std::size_t d = arch_.dim;
    const std::size_t batch = alphas.size();
    if (prompts.size() != batch)
        throw std::invalid_argument("DenoiserModel::forward_on_tape: shape");
    const std::size_t e = arch_.attr_embed_dim;
    const std::size_t k = arch_.time_embed_dim;

    Tensor temb({batch, k});
    std::vector<std::size_t> ia(batch), ib(batch);
    for (std::size_t r = 0; r < batch; ++r) {
        validate_prompt(prompts[r]);
        time_embedding(alphas[r], k, temb.data.data() + r * k);
        ia[r] = prompts[r].a ? static_cast<std::size_t>(*prompts[r].a) : null_a();
        ib[r] = prompts[r].b ? static_cast<std::size_t>(*prompts[r].b) : null_b();
    }
    auto time_node = tape.constant(std::move(temb));
    const auto& sa = params_.slice("emb_a");
    const auto& sb = params_.slice("emb_b");
    auto tab_a = tape.slice(params_node, sa.offset, sa.rows, sa.cols);
    auto tab_b = tape.slice(params_node, sb.offset, sb.rows, sb.cols);
    auto ea = tape.lookup_rows(tab_a, std::move(ia));
    auto eb = tape.lookup_rows(tab_b, std::move(ib));
    auto h = tape.concat_cols({x_node, time_node, ea, eb});

    std::size_t width = arch_.input_dim();
    for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
        const auto& W = params_.slice("W" + std::to_string(l));
        const auto& b = params_.slice("b" + std::to_string(l));
        auto Wn = tape.slice(params_node, W.offset, W.rows, W.cols);
        auto bn = tape.slice(params_node, b.offset, b.size(), 1);
        h = tape.silu(tape.affine(h, Wn, bn));
        width = W.rows;
    }
    const auto& Wo = params_.slice("W_out");
    const auto& bo = params_.slice("b_out");
    auto Wn = tape.slice(params_node, Wo.offset, Wo.rows, Wo.cols);
    auto bn = tape.slice(params_node, bo.offset, bo.size(), 1);
    return tape.affine(h, Wn, bn);
}

std::vector<double> predict_noise(const DenoiserModel& model,
                                  const std::vector<double>& x_t,
                                  std::size_t t, const NoiseSchedule& schedule,
                                  const world::ConceptPrompt& prompt) {
    return model.predict(x_t, schedule.logsnr(t), prompt);
}

std::vector<double> cfg_prediction(const NoisePredictor& model,
                                   const std::vector<double>& x_alpha,
                                   double alpha,
                                   const world::ConceptPrompt& prompt,
                                   double gamma) {
    if (prompt.is_null())
        throw std::invalid_argument(
            "cfg_prediction: prompt must have a non-null attribute");
    auto cond = model.predict(x_alpha, alpha, prompt);
    auto uncond = model.predict(x_alpha, alpha, world::ConceptPrompt::null());
    for (std::size_t i = 0; i < cond.size(); ++i)
        cond[i] = gamma * cond[i] + (1.0 - gamma) * uncond[i];
    return cond;
}

}  // namespace mimmu::diff
