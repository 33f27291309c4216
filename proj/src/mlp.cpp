#include "refinerl/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace refinerl {

namespace {

void add_bias_and_activate(RealMatrix& z, const std::vector<double>& bias, bool is_output,
                           const MlpParams& params) {
  const bool tanh_out = is_output && params.output_activation == OutputActivation::tanh_scaled;
  const bool relu = !is_output;
  for (std::size_t i = 0; i < z.rows; ++i) {
    double* row = z.row(i);
    for (std::size_t j = 0; j < z.cols; ++j) {
      double v = row[j] + bias[j];
      if (relu) {
        v = v > 0.0 ? v : 0.0;
      } else if (tanh_out) {
        v = params.bound * std::tanh(v);
      }
      row[j] = v;
    }
  }
}

// dOut/dPre for layer l given the cached post-activation values.
void chain_activation(RealMatrix& grad, const RealMatrix& post, bool is_output,
                      const MlpParams& params) {
  if (!is_output) {
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
      if (post.data[i] <= 0.0) grad.data[i] = 0.0;
    }
    return;
  }
  if (params.output_activation == OutputActivation::tanh_scaled) {
    const double bound = params.bound;
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
      const double y = post.data[i];
      grad.data[i] *= bound - y * y / bound;
    }
  }
}

}  // namespace

GradientBundle zeros_like(const MlpParams& params) {
  GradientBundle g;
  g.weights.reserve(params.layer_count());
  g.biases.reserve(params.layer_count());
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    g.weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

MlpParams make_mlp(const std::vector<std::size_t>& layer_dims, OutputActivation activation,
                   double bound, Rng& rng) {
  if (layer_dims.size() != 4) {
    throw std::invalid_argument("network must have exactly two hidden layers");
  }
  if (activation == OutputActivation::tanh_scaled && bound <= 0.0) {
    throw std::invalid_argument("tanh output bound must be positive");
  }
  MlpParams params;
  params.layer_dims = layer_dims;
  params.output_activation = activation;
  params.bound = bound;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    RealMatrix w(fan_in, fan_out);
    for (double& v : w.data) v = rng.uniform(-scale, scale);
    std::vector<double> b(fan_out);
    for (double& v : b) v = rng.uniform(-scale, scale);
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

RealMatrix mlp_forward(const MlpParams& params, const RealMatrix& inputs, ForwardCache* cache) {
  if (inputs.cols != params.input_dim()) {
    throw std::invalid_argument("forward input dim " + std::to_string(inputs.cols) +
                                " does not match network input " +
                                std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->acts.clear();
    cache->acts.reserve(params.layer_count() + 1);
    cache->acts.push_back(inputs);
  }
  RealMatrix own;
  const RealMatrix* current = &inputs;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    RealMatrix z;
    matmul(*current, params.weights[l], z);
    add_bias_and_activate(z, params.biases[l], l + 1 == params.layer_count(), params);
    if (cache) {
      cache->acts.push_back(std::move(z));
      current = &cache->acts.back();
    } else {
      own = std::move(z);
      current = &own;
    }
  }
  if (cache) {
    cache->valid = true;
    return cache->acts.back();
  }
  return own;
}

RealMatrix actor_forward(const MlpParams& params, const RealMatrix& states, ForwardCache* cache) {
  if (params.output_activation != OutputActivation::tanh_scaled) {
    throw std::invalid_argument("actor network must use a tanh-scaled output");
  }
  return mlp_forward(params, states, cache);
}

std::vector<double> critic_forward(const MlpParams& params, const RealMatrix& states,
                                   const RealMatrix& actions, ForwardCache* cache) {
  if (params.output_activation != OutputActivation::identity) {
    throw std::invalid_argument("critic network must use an identity output");
  }
  if (states.rows != actions.rows) {
    throw std::invalid_argument("state/action batch sizes differ");
  }
  const RealMatrix joined = concat_columns(states, actions);
  RealMatrix out = mlp_forward(params, joined, cache);
  std::vector<double> q(out.rows);
  for (std::size_t i = 0; i < out.rows; ++i) q[i] = out.at(i, 0);
  return q;
}

GradientBundle mlp_backward(const MlpParams& params, const ForwardCache& cache,
                            const RealMatrix& output_grad, RealMatrix* input_grad) {
  if (!cache.valid || cache.acts.size() != params.layer_count() + 1) {
    throw std::invalid_argument("backward called without cached forward activations");
  }
  if (output_grad.rows != cache.acts.back().rows || output_grad.cols != params.output_dim()) {
    throw std::invalid_argument("output gradient shape does not match forward output");
  }
  GradientBundle grads = zeros_like(params);
  RealMatrix delta = output_grad;
  for (std::size_t l = params.layer_count(); l-- > 0;) {
    chain_activation(delta, cache.acts[l + 1], l + 1 == params.layer_count(), params);
    matmul_at_b(cache.acts[l], delta, grads.weights[l]);
    std::vector<double>& db = grads.biases[l];
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* row = delta.row(i);
      for (std::size_t j = 0; j < delta.cols; ++j) db[j] += row[j];
    }
    if (l > 0 || input_grad) {
      RealMatrix next;
      matmul_a_bt(delta, params.weights[l], next);
      delta = std::move(next);
    }
  }
  if (input_grad) *input_grad = std::move(delta);
  return grads;
}

RealMatrix mlp_backward_input_only(const MlpParams& params, const ForwardCache& cache,
                                   const RealMatrix& output_grad) {
  if (!cache.valid || cache.acts.size() != params.layer_count() + 1) {
    throw std::invalid_argument("backward called without cached forward activations");
  }
  RealMatrix delta = output_grad;
  for (std::size_t l = params.layer_count(); l-- > 0;) {
    chain_activation(delta, cache.acts[l + 1], l + 1 == params.layer_count(), params);
    RealMatrix next;
    matmul_a_bt(delta, params.weights[l], next);
    delta = std::move(next);
  }
  return delta;
}

RealMatrix concat_columns(const RealMatrix& a, const RealMatrix& b) {
  if (a.rows != b.rows) {
    throw std::invalid_argument("concat_columns row mismatch");
  }
  RealMatrix out(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* row = out.row(i);
    const double* ar = a.row(i);
    const double* br = b.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) row[j] = ar[j];
    for (std::size_t j = 0; j < b.cols; ++j) row[a.cols + j] = br[j];
  }
  return out;
}

}  // namespace refinerl
