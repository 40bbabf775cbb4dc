#include "icrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "icrl/checkpoint.hpp"

namespace icrl {

namespace {

constexpr double kLogStdInit = -0.5;

std::vector<double> log_softmax(std::vector<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v -= m;
    sum += std::exp(v);
  }
  const double lse = std::log(sum);
  for (double& v : logits) v -= lse;
  return logits;
}

}  // namespace

PolicyBundle make_policy_bundle(const EnvSpec& spec, const std::vector<int>& policy_hidden,
                                const std::vector<int>& value_hidden, double lambda_init,
                                double entropy_coeff, double budget, std::mt19937_64& rng) {
  PolicyBundle b;
  b.discrete = spec.discrete_actions;
  b.lambda = lambda_init;
  b.entropy_coeff = entropy_coeff;
  b.budget = budget;

  std::vector<int> policy_dims = {spec.observation_dim};
  policy_dims.insert(policy_dims.end(), policy_hidden.begin(), policy_hidden.end());
  policy_dims.push_back(b.discrete ? spec.num_actions : spec.action_dim);
  b.policy_net = nn::make_mlp(
      policy_dims, b.discrete ? nn::Activation::softmax : nn::Activation::identity, rng, 0.01);

  std::vector<int> value_dims = {spec.observation_dim};
  value_dims.insert(value_dims.end(), value_hidden.begin(), value_hidden.end());
  value_dims.push_back(1);
  b.reward_value_net = nn::make_mlp(value_dims, nn::Activation::identity, rng);
  b.cost_value_net = nn::make_mlp(value_dims, nn::Activation::identity, rng);

  if (!b.discrete) b.log_std.assign(spec.action_dim, kLogStdInit);
  return b;
}

ActionSample sample_action(const PolicyBundle& bundle, std::span<const double> obs,
                           std::mt19937_64& rng) {
  ActionSample out;
  const std::vector<double> logits = nn::forward_logits(bundle.policy_net, obs);
  if (bundle.discrete) {
    const std::vector<double> logp = log_softmax(logits);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double acc = 0.0;
    int chosen = static_cast<int>(logp.size()) - 1;
    for (std::size_t a = 0; a < logp.size(); ++a) {
      acc += std::exp(logp[a]);
      if (u <= acc) {
        chosen = static_cast<int>(a);
        break;
      }
    }
    out.action = {static_cast<double>(chosen)};
    out.log_prob = logp[chosen];
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    out.action.resize(logits.size());
    out.log_prob = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double mean = std::tanh(logits[i]);
      const double sigma = std::exp(bundle.log_std[i]);
      const double a = mean + sigma * normal(rng);
      out.action[i] = a;
      const double z = (a - mean) / sigma;
      out.log_prob += -0.5 * z * z - bundle.log_std[i] - 0.5 * std::log(2.0 * std::numbers::pi);
    }
  }
  return out;
}

std::vector<double> greedy_action(const PolicyBundle& bundle, std::span<const double> obs) {
  const std::vector<double> logits = nn::forward_logits(bundle.policy_net, obs);
  if (bundle.discrete) {
    const auto it = std::max_element(logits.begin(), logits.end());
    return {static_cast<double>(std::distance(logits.begin(), it))};
  }
  std::vector<double> a(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) a[i] = std::tanh(logits[i]);
  return a;
}

double action_log_prob(const PolicyBundle& bundle, std::span<const double> obs,
                       std::span<const double> action) {
  const std::vector<double> logits = nn::forward_logits(bundle.policy_net, obs);
  if (bundle.discrete) {
    const std::vector<double> logp = log_softmax(logits);
    return logp[static_cast<int>(action[0])];
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double mean = std::tanh(logits[i]);
    const double sigma = std::exp(bundle.log_std[i]);
    const double z = (action[i] - mean) / sigma;
    lp += -0.5 * z * z - bundle.log_std[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

nlohmann::json policy_bundle_to_json(const PolicyBundle& bundle) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "policy_bundle";
  j["discrete"] = bundle.discrete;
  j["policy_net"] = mlp_to_json(bundle.policy_net);
  j["reward_value_net"] = mlp_to_json(bundle.reward_value_net);
  j["cost_value_net"] = mlp_to_json(bundle.cost_value_net);
  j["log_std"] = bundle.log_std;
  j["lambda"] = bundle.lambda;
  j["entropy_coeff"] = bundle.entropy_coeff;
  j["budget"] = bundle.budget;
  return j;
}

PolicyBundle policy_bundle_from_json(const nlohmann::json& j) {
  check_container(j, "policy_bundle");
  PolicyBundle b;
  b.discrete = j.at("discrete").get<bool>();
  b.policy_net = mlp_from_json(j.at("policy_net"));
  b.reward_value_net = mlp_from_json(j.at("reward_value_net"));
  b.cost_value_net = mlp_from_json(j.at("cost_value_net"));
  b.log_std = j.at("log_std").get<std::vector<double>>();
  b.lambda = j.at("lambda").get<double>();
  b.entropy_coeff = j.at("entropy_coeff").get<double>();
  b.budget = j.at("budget").get<double>();
  return b;
}

}  // namespace icrl
