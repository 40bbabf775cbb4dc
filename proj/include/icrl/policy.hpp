#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "icrl/env.hpp"
#include "icrl/nn.hpp"

namespace icrl {

// Policy network plus the two critics and the Lagrange multiplier of the
// constrained objective. Discrete policies use a softmax head; continuous
// policies a diagonal Gaussian with tanh-squashed mean and a state-independent
// learned log-std.
struct PolicyBundle {
  nn::MlpParams policy_net;
  nn::MlpParams reward_value_net;
  nn::MlpParams cost_value_net;
  std::vector<double> log_std;  // continuous policies only
  bool discrete = true;
  double lambda = 1.0;
  double entropy_coeff = 0.0;
  double budget = 0.0;

  int action_dim() const {
    return discrete ? policy_net.output_dim() : static_cast<int>(log_std.size());
  }
};

PolicyBundle make_policy_bundle(const EnvSpec& spec, const std::vector<int>& policy_hidden,
                                const std::vector<int>& value_hidden, double lambda_init,
                                double entropy_coeff, double budget, std::mt19937_64& rng);

struct ActionSample {
  std::vector<double> action;
  double log_prob = 0.0;
};

ActionSample sample_action(const PolicyBundle& bundle, std::span<const double> obs,
                           std::mt19937_64& rng);

// Mode action: argmax for discrete, tanh(mean) for continuous.
std::vector<double> greedy_action(const PolicyBundle& bundle, std::span<const double> obs);

double action_log_prob(const PolicyBundle& bundle, std::span<const double> obs,
                       std::span<const double> action);

nlohmann::json policy_bundle_to_json(const PolicyBundle& bundle);
PolicyBundle policy_bundle_from_json(const nlohmann::json& j);

}  // namespace icrl
