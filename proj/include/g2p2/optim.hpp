#pragma once

#include <vector>

#include "g2p2/autodiff.hpp"

namespace g2p2 {

// Adam hyperparameters. Defaults follow the standard recommendation.
struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Applies one Adam update to every parameter in `params` using the gradients
// accumulated in Parameter::grad, then zeroes those gradients. Moment buffers
// are allocated lazily on the first step. Throws ValidationError for lr <= 0.
void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg);

}  // namespace g2p2
