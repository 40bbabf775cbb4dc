#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "icrl/env.hpp"
#include "icrl/policy.hpp"

namespace icrl {

// Per-pair cost consumed by the constrained solver (usually 1 - zeta).
using CostFn =
    std::function<double(std::span<const double> state, std::span<const double> action)>;

// Optional reward shaping r' = f(r, state, action) (GAIL-style baselines).
using RewardTransform = std::function<double(double reward, std::span<const double> state,
                                             std::span<const double> action)>;

struct RolloutStep {
  std::vector<double> state;
  std::vector<double> obs;
  std::vector<double> action;
  double log_prob = 0.0;
  double reward = 0.0;
  double cost = 0.0;
  double reward_value = 0.0;
  double cost_value = 0.0;
  double reward_advantage = 0.0;
  double cost_advantage = 0.0;
  double reward_return = 0.0;
  double cost_return = 0.0;
};

struct RolloutEpisode {
  std::vector<RolloutStep> steps;
  bool terminal = false;  // env-terminal; false means horizon truncation
  double bootstrap_reward_value = 0.0;
  double bootstrap_cost_value = 0.0;
  Trajectory to_trajectory() const;
};

struct RolloutBatch {
  std::vector<RolloutEpisode> episodes;

  int total_steps() const;
  // Mean over episodes of the discounted cost sum: the J^c estimate fed to
  // the dual update.
  double mean_discounted_cost(double gamma) const;
  double mean_episode_reward() const;
};

// Discounted-TD-residual recursion. `values` carries one bootstrap entry at
// the end (len(values) == len(rewards) + 1).
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda);

// Collects whole episodes until at least `min_steps` steps are gathered.
RolloutBatch collect_rollouts(const Env& env, const PolicyBundle& bundle, EnvMode mode,
                              int min_steps, int horizon, const CostFn& cost_fn,
                              std::mt19937_64& rng,
                              const RewardTransform* reward_transform = nullptr);

// Fills advantages and returns for both streams.
void compute_advantages(RolloutBatch& batch, double reward_gamma, double reward_lambda,
                        double cost_gamma, double cost_lambda);

// Plain environment episode without critics or costs: used for expert data,
// evaluation, and dataset generation.
Trajectory run_episode(const Env& env, const PolicyBundle& bundle, EnvMode mode, int horizon,
                       bool stochastic, std::mt19937_64& rng);

}  // namespace icrl
