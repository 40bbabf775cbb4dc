#include "icrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icrl::nn {

double stable_sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softmax") return Activation::softmax;
  throw ConfigError("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.data.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool MlpParams::finite() const {
  for (const auto& w : weights)
    for (double v : w.data)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

namespace {

void check_dims(const std::vector<int>& layer_dims) {
  if (layer_dims.size() < 2) throw ConfigError("mlp needs at least input and output dims");
  for (int d : layer_dims)
    if (d <= 0) throw ConfigError("mlp layer dims must be positive");
}

void apply_output_activation(Activation act, std::vector<double>& v) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::sigmoid:
      for (double& x : v) x = clamp_unit(stable_sigmoid(x));
      return;
    case Activation::softmax: {
      const double m = *std::max_element(v.begin(), v.end());
      double sum = 0.0;
      for (double& x : v) {
        x = std::exp(x - m);
        sum += x;
      }
      for (double& x : v) x /= sum;
      return;
    }
  }
}

// Affine layer followed (optionally) by tanh, writing into `out`.
void affine(const Matrix& w, const std::vector<double>& b, std::span<const double> in,
            std::vector<double>& out) {
  out.assign(b.begin(), b.end());
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = w.data.data() + static_cast<std::size_t>(r) * w.cols;
    double acc = out[r];
    for (int c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
    out[r] = acc;
  }
}

std::vector<double> run_forward(const MlpParams& params, std::span<const double> input,
                                Tape* tape, bool apply_output) {
  if (static_cast<int>(input.size()) != params.input_dim()) {
    throw DimensionError("mlp forward: expected input size " +
                         std::to_string(params.input_dim()) + ", got " +
                         std::to_string(input.size()));
  }
  const int layers = params.num_layers();
  if (tape) {
    tape->input.assign(input.begin(), input.end());
    tape->post.assign(layers, {});
  }
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  for (int l = 0; l < layers; ++l) {
    affine(params.weights[l], params.biases[l], cur, next);
    const bool last = (l == layers - 1);
    if (!last) {
      for (double& x : next) x = std::tanh(x);
    } else if (apply_output) {
      apply_output_activation(params.output_activation, next);
    }
    if (tape) tape->post[l] = next;
    cur.swap(next);
  }
  return cur;
}

}  // namespace

MlpParams make_mlp(const std::vector<int>& layer_dims, Activation output_activation,
                   std::mt19937_64& rng, double final_layer_scale) {
  check_dims(layer_dims);
  MlpParams p;
  p.layer_dims = layer_dims;
  p.output_activation = output_activation;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = dist(rng);
    if (l + 2 == layer_dims.size() && final_layer_scale != 1.0) {
      for (double& v : w.data) v *= final_layer_scale;
    }
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

MlpParams make_zero_mlp(const std::vector<int>& layer_dims, Activation output_activation) {
  check_dims(layer_dims);
  MlpParams p;
  p.layer_dims = layer_dims;
  p.output_activation = output_activation;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    p.weights.emplace_back(layer_dims[l + 1], layer_dims[l]);
    p.biases.emplace_back(layer_dims[l + 1], 0.0);
  }
  return p;
}

std::vector<double> forward(const MlpParams& params, std::span<const double> input) {
  return run_forward(params, input, nullptr, true);
}

std::vector<double> forward(const MlpParams& params, std::span<const double> input, Tape& tape) {
  return run_forward(params, input, &tape, true);
}

std::vector<double> forward_logits(const MlpParams& params, std::span<const double> input,
                                   Tape* tape) {
  return run_forward(params, input, tape, false);
}

void MlpGrads::scale(double s) {
  for (auto& w : weights)
    for (double& v : w.data) v *= s;
  for (auto& b : biases)
    for (double& v : b) v *= s;
}

void MlpGrads::add_scaled(const MlpGrads& other, double coeff) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].data.size(); ++i)
      weights[l].data[i] += coeff * other.weights[l].data[i];
    for (std::size_t i = 0; i < biases[l].size(); ++i)
      biases[l][i] += coeff * other.biases[l][i];
  }
}

double MlpGrads::squared_norm() const {
  double n = 0.0;
  for (const auto& w : weights)
    for (double v : w.data) n += v * v;
  for (const auto& b : biases)
    for (double v : b) n += v * v;
  return n;
}

bool MlpGrads::finite() const {
  for (const auto& w : weights)
    for (double v : w.data)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

void MlpGrads::zero() {
  for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

MlpGrads zero_grads_like(const MlpParams& params) {
  MlpGrads g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

namespace {

// Backpropagates delta (dLoss/d pre-activation of layer `last`) down to the
// input, accumulating weight and bias gradients scaled by `coeff`.
void backprop_from_delta(const MlpParams& params, const Tape& tape, std::vector<double> delta,
                         double coeff, MlpGrads& into) {
  const int layers = params.num_layers();
  std::vector<double> prev_delta;
  for (int l = layers - 1; l >= 0; --l) {
    const std::vector<double>& below =
        (l == 0) ? tape.input : tape.post[static_cast<std::size_t>(l) - 1];
    const Matrix& w = params.weights[l];
    Matrix& gw = into.weights[l];
    std::vector<double>& gb = into.biases[l];
    for (int r = 0; r < w.rows; ++r) {
      const double d = coeff * delta[r];
      gb[r] += d;
      double* grow = gw.data.data() + static_cast<std::size_t>(r) * w.cols;
      for (int c = 0; c < w.cols; ++c) grow[c] += d * below[c];
    }
    if (l == 0) break;
    prev_delta.assign(below.size(), 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[r];
      const double* wr = w.data.data() + static_cast<std::size_t>(r) * w.cols;
      for (int c = 0; c < w.cols; ++c) prev_delta[c] += d * wr[c];
    }
    // below is tanh output of layer l-1
    for (std::size_t i = 0; i < prev_delta.size(); ++i)
      prev_delta[i] *= 1.0 - below[i] * below[i];
    delta.swap(prev_delta);
  }
}

std::vector<double> output_grad_to_delta(const MlpParams& params, const Tape& tape,
                                         std::span<const double> output_grad) {
  const std::vector<double>& out = tape.post.back();
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  switch (params.output_activation) {
    case Activation::identity:
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= out[i] * (1.0 - out[i]);
      break;
    case Activation::softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < delta.size(); ++i) dot += delta[i] * out[i];
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = out[i] * (delta[i] - dot);
      break;
    }
  }
  return delta;
}

}  // namespace

MlpGrads backward(const MlpParams& params, const Tape& tape,
                  std::span<const double> output_grad) {
  MlpGrads g = zero_grads_like(params);
  accumulate_backward(params, tape, output_grad, 1.0, g);
  return g;
}

void accumulate_backward(const MlpParams& params, const Tape& tape,
                         std::span<const double> output_grad, double coeff, MlpGrads& into) {
  if (static_cast<int>(output_grad.size()) != params.output_dim()) {
    throw DimensionError("mlp backward: expected output grad size " +
                         std::to_string(params.output_dim()) + ", got " +
                         std::to_string(output_grad.size()));
  }
  backprop_from_delta(params, tape, output_grad_to_delta(params, tape, output_grad), coeff,
                      into);
}

void accumulate_backward_from_logits(const MlpParams& params, const Tape& tape,
                                     std::span<const double> logit_grad, double coeff,
                                     MlpGrads& into) {
  if (static_cast<int>(logit_grad.size()) != params.output_dim()) {
    throw DimensionError("mlp backward: expected logit grad size " +
                         std::to_string(params.output_dim()) + ", got " +
                         std::to_string(logit_grad.size()));
  }
  backprop_from_delta(params, tape, std::vector<double>(logit_grad.begin(), logit_grad.end()),
                      coeff, into);
}

AdamState make_adam(const MlpParams& params, double learning_rate) {
  if (learning_rate <= 0.0) throw ConfigError("adam learning rate must be positive");
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment = zero_grads_like(params);
  s.second_moment = zero_grads_like(params);
  return s;
}

namespace {

void adam_update_span(std::span<double> values, std::span<const double> grads,
                      std::span<double> m, std::span<double> v, double lr, double b1, double b2,
                      double eps, std::int64_t step) {
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < values.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grads[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

void adam_step_inplace(MlpParams& params, const MlpGrads& grads, AdamState& state) {
  if (!grads.finite()) throw NumericalError("adam_step: non-finite gradient, update rejected");
  state.step += 1;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    adam_update_span(params.weights[l].data, grads.weights[l].data,
                     state.first_moment.weights[l].data, state.second_moment.weights[l].data,
                     state.learning_rate, state.beta1, state.beta2, state.epsilon, state.step);
    adam_update_span(params.biases[l], grads.biases[l], state.first_moment.biases[l],
                     state.second_moment.biases[l], state.learning_rate, state.beta1,
                     state.beta2, state.epsilon, state.step);
  }
}

std::pair<MlpParams, AdamState> adam_step(const MlpParams& params, const MlpGrads& grads,
                                          const AdamState& state) {
  MlpParams p = params;
  AdamState s = state;
  adam_step_inplace(p, grads, s);
  return {std::move(p), std::move(s)};
}

VectorAdamState make_vector_adam(std::size_t size, double learning_rate) {
  if (learning_rate <= 0.0) throw ConfigError("adam learning rate must be positive");
  VectorAdamState s;
  s.learning_rate = learning_rate;
  s.first_moment.assign(size, 0.0);
  s.second_moment.assign(size, 0.0);
  return s;
}

void adam_step_inplace(std::vector<double>& values, std::span<const double> grads,
                       VectorAdamState& state) {
  for (double g : grads)
    if (!std::isfinite(g))
      throw NumericalError("adam_step: non-finite gradient, update rejected");
  state.step += 1;
  adam_update_span(values, grads, state.first_moment, state.second_moment,
                   state.learning_rate, state.beta1, state.beta2, state.epsilon, state.step);
}

}  // namespace icrl::nn
