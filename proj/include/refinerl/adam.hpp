#pragma once

#include <cstdint>

#include "refinerl/mlp.hpp"

namespace refinerl {

struct AdamState {
  std::uint64_t step_count = 0;
  GradientBundle m;  // first moments, shapes mirror the owning network
  GradientBundle v;  // second moments, entries >= 0
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
};

AdamState make_adam(const MlpParams& params, double learning_rate);

enum class StepDirection { descent, ascent };

// One bias-corrected Adam update with the epsilon inside the root:
//   param -= lr * m_hat / sqrt(v_hat + eps)
// `ascent` negates the gradient before the update, so ascent on L is
// bit-identical to descent on -L. Throws on a non-finite gradient, naming
// the offending layer.
void adam_step(MlpParams& params, AdamState& state, const GradientBundle& grads,
               StepDirection direction);

// target <- tau * online + (1 - tau) * target, elementwise.
void polyak_update(MlpParams& target, const MlpParams& online, double tau);

}  // namespace refinerl
