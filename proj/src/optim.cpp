#include "g2p2/optim.hpp"

#include <cmath>

#include "g2p2/errors.hpp"

namespace g2p2 {

void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0f)) throw ValidationError("adam_step: learning rate must be positive");
  if (!(cfg.beta1 >= 0.0f && cfg.beta1 < 1.0f) || !(cfg.beta2 >= 0.0f && cfg.beta2 < 1.0f)) {
    throw ValidationError("adam_step: betas must lie in [0, 1)");
  }
  for (Parameter* p : params) {
    if (p->adam_m.numel() != p->value.numel()) {
      p->adam_m = Tensor::zeros_like(p->value);
      p->adam_v = Tensor::zeros_like(p->value);
    }
    p->step_count += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(p->step_count));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(p->step_count));
    float* w = p->value.data();
    float* g = p->grad.data();
    float* m = p->adam_m.data();
    float* v = p->adam_v.data();
    const std::size_t n = p->value.numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
      const float mhat = static_cast<float>(m[i] / bc1);
      const float vhat = static_cast<float>(v[i] / bc2);
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      g[i] = 0.0f;
    }
  }
}

}  // namespace g2p2
