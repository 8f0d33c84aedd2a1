#pragma once

#include <cstdint>
#include <vector>

#include "gcsd/model.hpp"

namespace gcsd {

// Linear warmup to peak_lr over warmup_fraction of the horizon, then cosine
// annealing back down to floor_lr.
struct LrSchedule {
    double peak_lr = 5e-5;
    double floor_lr = 1e-7;
    double warmup_fraction = 0.05;

    int64_t warmup_steps(int64_t total_steps) const;
};

double lr_at(int64_t step, int64_t total_steps, const LrSchedule& s);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled; applied as p *= (1 - lr*wd)
};

// Moment state is keyed by position, so every step must pass the same
// parameter list in the same order.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads, double lr);
    int64_t steps_taken() const { return t_; }

private:
    AdamWConfig cfg_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

void zero_grads(const std::vector<ParamRef>& grads);
void scale_grads(const std::vector<ParamRef>& grads, double s);
double grad_norm(const std::vector<ParamRef>& grads);
// Scales gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
double clip_grad_norm(const std::vector<ParamRef>& grads, double max_norm);

}  // namespace gcsd
