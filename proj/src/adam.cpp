#include "refinerl/adam.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace refinerl {

namespace {

void update_block(std::span<double> values, std::span<double> m, std::span<double> v,
                  std::span<const double> grads, const AdamState& state, double sign,
                  double bias1, double bias2, const std::string& block_name) {
  if (!all_finite(grads)) {
    throw std::runtime_error("non-finite gradient in " + block_name);
  }
  const double lr = state.learning_rate;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.eps_adam;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = sign * grads[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    values[i] -= lr * m_hat / std::sqrt(v_hat + eps);
  }
}

void check_congruent(const MlpParams& params, const GradientBundle& grads) {
  if (grads.weights.size() != params.layer_count() || grads.biases.size() != params.layer_count()) {
    throw std::invalid_argument("gradient layer count does not match network");
  }
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    if (grads.weights[l].rows != params.weights[l].rows ||
        grads.weights[l].cols != params.weights[l].cols ||
        grads.biases[l].size() != params.biases[l].size()) {
      throw std::invalid_argument("gradient shape mismatch at layer " + std::to_string(l));
    }
  }
}

}  // namespace

AdamState make_adam(const MlpParams& params, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  return state;
}

void adam_step(MlpParams& params, AdamState& state, const GradientBundle& grads,
               StepDirection direction) {
  check_congruent(params, grads);
  const double sign = direction == StepDirection::ascent ? -1.0 : 1.0;
  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    update_block(params.weights[l].data, state.m.weights[l].data, state.v.weights[l].data,
                 grads.weights[l].data, state, sign, bias1, bias2,
                 "layer " + std::to_string(l) + " weights");
    update_block(params.biases[l], state.m.biases[l], state.v.biases[l], grads.biases[l], state,
                 sign, bias1, bias2, "layer " + std::to_string(l) + " biases");
  }
}

void polyak_update(MlpParams& target, const MlpParams& online, double tau) {
  if (tau < 0.0 || tau > 1.0) {
    throw std::invalid_argument("polyak tau must lie in [0, 1]");
  }
  if (target.layer_dims != online.layer_dims) {
    throw std::invalid_argument("polyak_update network shape mismatch");
  }
  for (std::size_t l = 0; l < target.layer_count(); ++l) {
    double* t = target.weights[l].data.data();
    const double* o = online.weights[l].data.data();
    for (std::size_t i = 0; i < target.weights[l].data.size(); ++i) {
      t[i] = tau * o[i] + (1.0 - tau) * t[i];
    }
    double* tb = target.biases[l].data();
    const double* ob = online.biases[l].data();
    for (std::size_t i = 0; i < target.biases[l].size(); ++i) {
      tb[i] = tau * ob[i] + (1.0 - tau) * tb[i];
    }
  }
}

}  // namespace refinerl
