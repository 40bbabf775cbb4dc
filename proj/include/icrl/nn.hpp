#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "icrl/errors.hpp"

namespace icrl::nn {

// Sigmoid outputs are clamped into [kClamp, 1 - kClamp] so that log(zeta)
// and 1/(1 - zeta) stay finite everywhere.
constexpr double kClamp = 1e-6;

inline double clamp_unit(double p) {
  if (p < kClamp) return kClamp;
  if (p > 1.0 - kClamp) return 1.0 - kClamp;
  return p;
}

double stable_sigmoid(double z);

enum class Activation { identity, sigmoid, softmax };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

// Dense row-major matrix of doubles. Rows index output units.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Fully connected network: tanh hidden layers, configurable output head.
struct MlpParams {
  std::vector<int> layer_dims;  // [input, hidden..., output]
  std::vector<Matrix> weights;  // weights[l] has shape dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases;
  Activation output_activation = Activation::identity;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
  bool finite() const;
};

// Uniform fan-in initialization, weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
// biases zero. `final_layer_scale` shrinks the last layer (near-uniform
// initial policies).
MlpParams make_mlp(const std::vector<int>& layer_dims, Activation output_activation,
                   std::mt19937_64& rng, double final_layer_scale = 1.0);

MlpParams make_zero_mlp(const std::vector<int>& layer_dims, Activation output_activation);

// Per-layer activations recorded by a forward pass, consumed by backward().
struct Tape {
  std::vector<double> input;
  std::vector<std::vector<double>> post;  // post-activation per layer; back() is the output
};

std::vector<double> forward(const MlpParams& params, std::span<const double> input);
std::vector<double> forward(const MlpParams& params, std::span<const double> input, Tape& tape);

// Runs the network but skips the output activation, returning the final
// pre-activation. For softmax heads this is the stable path to log-probs.
std::vector<double> forward_logits(const MlpParams& params, std::span<const double> input,
                                   Tape* tape = nullptr);

// Parameter-shaped gradient container.
struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  void scale(double s);
  void add_scaled(const MlpGrads& other, double coeff);
  double squared_norm() const;
  bool finite() const;
  void zero();
};

MlpGrads zero_grads_like(const MlpParams& params);

// Gradient of a scalar loss w.r.t. all parameters, given dLoss/dOutput where
// the output is post-activation. Exact chain rule, no approximations.
MlpGrads backward(const MlpParams& params, const Tape& tape,
                  std::span<const double> output_grad);

// Accumulating variants used in batch loops. `coeff` scales the contribution.
void accumulate_backward(const MlpParams& params, const Tape& tape,
                         std::span<const double> output_grad, double coeff, MlpGrads& into);

// Same but output_grad is w.r.t. the final pre-activation (logits). Skips the
// output-activation Jacobian.
void accumulate_backward_from_logits(const MlpParams& params, const Tape& tape,
                                     std::span<const double> logit_grad, double coeff,
                                     MlpGrads& into);

// Adaptive moment estimation with bias correction.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  MlpGrads first_moment;
  MlpGrads second_moment;
};

AdamState make_adam(const MlpParams& params, double learning_rate);

// Ascent step when `grads` is an ascent direction negated by caller; by
// convention here grads are treated as the gradient of a loss to DESCEND.
// Throws NumericalError on non-finite gradients; no state is modified then.
void adam_step_inplace(MlpParams& params, const MlpGrads& grads, AdamState& state);

std::pair<MlpParams, AdamState> adam_step(const MlpParams& params, const MlpGrads& grads,
                                          const AdamState& state);

// Adam over a flat vector (e.g. a Gaussian policy's log-std).
struct VectorAdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

VectorAdamState make_vector_adam(std::size_t size, double learning_rate);
void adam_step_inplace(std::vector<double>& values, std::span<const double> grads,
                       VectorAdamState& state);

}  // namespace icrl::nn
