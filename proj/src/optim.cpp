#include "gcsd/optim.hpp"

#include <cmath>

#include "gcsd/errors.hpp"

namespace gcsd {

int64_t LrSchedule::warmup_steps(int64_t total_steps) const {
    return std::max<int64_t>(1, std::llround(warmup_fraction * static_cast<double>(total_steps)));
}

double lr_at(int64_t step, int64_t total_steps, const LrSchedule& s) {
    if (total_steps <= 0) return s.floor_lr;
    int64_t warmup = s.warmup_steps(total_steps);
    if (step < warmup)
        return s.floor_lr + (s.peak_lr - s.floor_lr) * static_cast<double>(step) /
                                static_cast<double>(warmup);
    int64_t denom = std::max<int64_t>(1, total_steps - warmup);
    double progress = static_cast<double>(step - warmup) / static_cast<double>(denom);
    return s.floor_lr + 0.5 * (s.peak_lr - s.floor_lr) * (1.0 + std::cos(M_PI * progress));
}

void AdamW::step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads, double lr) {
    if (params.size() != grads.size()) throw ShapeMismatch("optimizer param/grad lists");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i] = Tensor(params[i].tensor->rows, params[i].tensor->cols);
            v_[i] = Tensor(params[i].tensor->rows, params[i].tensor->cols);
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].tensor;
        const Tensor& g = *grads[i].tensor;
        if (!p.same_shape(g) || !p.same_shape(m_[i])) throw ShapeMismatch("optimizer tensor " + params[i].name);
        if (params[i].decay && cfg_.weight_decay > 0.0) {
            double keep = 1.0 - lr * cfg_.weight_decay;
            for (double& x : p.v) x *= keep;
        }
        for (size_t j = 0; j < p.v.size(); ++j) {
            double gj = g.v[j];
            m_[i].v[j] = cfg_.beta1 * m_[i].v[j] + (1.0 - cfg_.beta1) * gj;
            v_[i].v[j] = cfg_.beta2 * v_[i].v[j] + (1.0 - cfg_.beta2) * gj * gj;
            double mhat = m_[i].v[j] / bc1;
            double vhat = v_[i].v[j] / bc2;
            p.v[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void zero_grads(const std::vector<ParamRef>& grads) {
    for (const auto& ref : grads) ref.tensor->zero();
}

void scale_grads(const std::vector<ParamRef>& grads, double s) {
    for (const auto& ref : grads)
        for (double& x : ref.tensor->v) x *= s;
}

double grad_norm(const std::vector<ParamRef>& grads) {
    double sq = 0.0;
    for (const auto& ref : grads)
        for (double x : ref.tensor->v) sq += x * x;
    return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<ParamRef>& grads, double max_norm) {
    double norm = grad_norm(grads);
    if (max_norm > 0.0 && norm > max_norm) scale_grads(grads, max_norm / norm);
    return norm;
}

}  // namespace gcsd
