#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aisgap/nn/tensor.hpp"

namespace aisgap::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment estimates for one parameter array.
struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state,
               const AdamConfig& cfg);

/// Adam over a fixed set of named parameters; reads each tensor's grad().
class Adam {
public:
    Adam(std::vector<ParamRef> params, AdamConfig cfg);

    void step();
    void zero_grad();

    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<ParamRef> params_;
    std::vector<AdamMoments> moments_;
    AdamConfig cfg_;
};

}  // namespace aisgap::nn
