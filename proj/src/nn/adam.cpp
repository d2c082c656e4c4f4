#include "aisgap/nn/adam.hpp"

#include <cmath>

#include "aisgap/error.hpp"

namespace aisgap::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state,
               const AdamConfig& cfg) {
    require_shape(params.size() == grads.size(), "adam params vs grads");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    require_shape(state.m.size() == params.size(), "adam state vs params");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

Adam::Adam(std::vector<ParamRef> params, AdamConfig cfg)
    : params_(std::move(params)), moments_(params_.size()), cfg_(cfg) {}

void Adam::step() {
    for (std::size_t i = 0; i < params_.size(); ++i)
        adam_step(params_[i].tensor->values(), params_[i].tensor->grad(), moments_[i], cfg_);
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor->zero_grad();
}

}  // namespace aisgap::nn
