#pragma once

#include <cstddef>
#include <vector>

#include "refinerl/matrix.hpp"
#include "refinerl/rng.hpp"

namespace refinerl {

enum class OutputActivation { tanh_scaled, identity };

// Fully-connected network with two ReLU hidden layers. Weights are stored
// (fan_in x fan_out) so a batch forward is `activations * W + b` row-wise.
struct MlpParams {
  std::vector<std::size_t> layer_dims;  // input, hidden, hidden, output
  std::vector<RealMatrix> weights;
  std::vector<std::vector<double>> biases;
  OutputActivation output_activation = OutputActivation::identity;
  double bound = 1.0;  // output scale when tanh_scaled

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t layer_count() const { return weights.size(); }
};

// Per-parameter mirror of an MlpParams shape; also reused for Adam moments.
struct GradientBundle {
  std::vector<RealMatrix> weights;
  std::vector<std::vector<double>> biases;
};

GradientBundle zeros_like(const MlpParams& params);

// Layer activations kept from a forward pass: acts[0] is the input batch,
// acts[l] the post-activation output of layer l (acts.back() is the output).
struct ForwardCache {
  std::vector<RealMatrix> acts;
  bool valid = false;
};

// Initialisation draws, per layer in order, every weight (row-major) then
// every bias, uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
MlpParams make_mlp(const std::vector<std::size_t>& layer_dims, OutputActivation activation,
                   double bound, Rng& rng);

RealMatrix mlp_forward(const MlpParams& params, const RealMatrix& inputs,
                       ForwardCache* cache = nullptr);

// states: batch x obs_dim -> batch x act_dim, components in [-bound, bound].
RealMatrix actor_forward(const MlpParams& params, const RealMatrix& states,
                         ForwardCache* cache = nullptr);

// (states, actions): batch rows -> one Q value per row.
std::vector<double> critic_forward(const MlpParams& params, const RealMatrix& states,
                                   const RealMatrix& actions, ForwardCache* cache = nullptr);

// Gradients of a scalar loss with respect to every parameter given
// dLoss/dOutput; optionally also with respect to the input batch (used to
// chain the critic into the actor update).
GradientBundle mlp_backward(const MlpParams& params, const ForwardCache& cache,
                            const RealMatrix& output_grad, RealMatrix* input_grad = nullptr);

// Input gradient only; skips the parameter-gradient products.
RealMatrix mlp_backward_input_only(const MlpParams& params, const ForwardCache& cache,
                                   const RealMatrix& output_grad);

RealMatrix concat_columns(const RealMatrix& a, const RealMatrix& b);

}  // namespace refinerl
