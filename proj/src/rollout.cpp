#include "icrl/rollout.hpp"

#include <cmath>

namespace icrl {

Trajectory RolloutEpisode::to_trajectory() const {
  Trajectory traj;
  traj.transitions.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    Transition tr;
    tr.state = steps[t].state;
    tr.action = steps[t].action;
    tr.reward = steps[t].reward;
    tr.done = (t + 1 == steps.size());
    traj.transitions.push_back(std::move(tr));
  }
  return traj;
}

int RolloutBatch::total_steps() const {
  int n = 0;
  for (const auto& e : episodes) n += static_cast<int>(e.steps.size());
  return n;
}

double RolloutBatch::mean_discounted_cost(double gamma) const {
  if (episodes.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : episodes) {
    double g = 1.0;
    for (const auto& s : e.steps) {
      sum += g * s.cost;
      g *= gamma;
    }
  }
  return sum / static_cast<double>(episodes.size());
}

double RolloutBatch::mean_episode_reward() const {
  if (episodes.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : episodes)
    for (const auto& s : e.steps) sum += s.reward;
  return sum / static_cast<double>(episodes.size());
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda) {
  if (values.size() != rewards.size() + 1) {
    throw DimensionError("gae: need len(values) == len(rewards) + 1, got " +
                         std::to_string(values.size()) + " vs " +
                         std::to_string(rewards.size()));
  }
  std::vector<double> adv(rewards.size(), 0.0);
  double last = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    last = delta + gamma * lambda * last;
    adv[t] = last;
  }
  return adv;
}

namespace {

double scalar_value(const nn::MlpParams& net, std::span<const double> obs) {
  return nn::forward_logits(net, obs)[0];
}

}  // namespace

RolloutBatch collect_rollouts(const Env& env, const PolicyBundle& bundle, EnvMode mode,
                              int min_steps, int horizon, const CostFn& cost_fn,
                              std::mt19937_64& rng, const RewardTransform* reward_transform) {
  RolloutBatch batch;
  int steps = 0;
  std::uint64_t episode_index = 0;
  while (steps < min_steps) {
    RolloutEpisode ep;
    std::vector<double> state = env.reset(episode_index++);
    for (int t = 0; t < horizon; ++t) {
      RolloutStep step;
      step.state = state;
      step.obs = env.observe(state);
      ActionSample a = sample_action(bundle, step.obs, rng);
      step.action = a.action;
      step.log_prob = a.log_prob;
      Transition tr = env.step(state, step.action, mode);
      step.reward = tr.reward;
      if (reward_transform) step.reward = (*reward_transform)(tr.reward, state, step.action);
      step.cost = cost_fn ? cost_fn(state, step.action) : 0.0;
      step.reward_value = scalar_value(bundle.reward_value_net, step.obs);
      step.cost_value = scalar_value(bundle.cost_value_net, step.obs);
      ep.steps.push_back(std::move(step));
      state = tr.next_state;
      if (tr.done) {
        ep.terminal = true;
        break;
      }
    }
    if (!ep.terminal) {
      const std::vector<double> obs = env.observe(state);
      ep.bootstrap_reward_value = scalar_value(bundle.reward_value_net, obs);
      ep.bootstrap_cost_value = scalar_value(bundle.cost_value_net, obs);
    }
    steps += static_cast<int>(ep.steps.size());
    batch.episodes.push_back(std::move(ep));
  }
  return batch;
}

void compute_advantages(RolloutBatch& batch, double reward_gamma, double reward_lambda,
                        double cost_gamma, double cost_lambda) {
  for (auto& ep : batch.episodes) {
    const std::size_t n = ep.steps.size();
    std::vector<double> rewards(n), costs(n), rvalues(n + 1), cvalues(n + 1);
    for (std::size_t t = 0; t < n; ++t) {
      rewards[t] = ep.steps[t].reward;
      costs[t] = ep.steps[t].cost;
      rvalues[t] = ep.steps[t].reward_value;
      cvalues[t] = ep.steps[t].cost_value;
    }
    rvalues[n] = ep.terminal ? 0.0 : ep.bootstrap_reward_value;
    cvalues[n] = ep.terminal ? 0.0 : ep.bootstrap_cost_value;
    const std::vector<double> radv = gae(rewards, rvalues, reward_gamma, reward_lambda);
    const std::vector<double> cadv = gae(costs, cvalues, cost_gamma, cost_lambda);
    for (std::size_t t = 0; t < n; ++t) {
      ep.steps[t].reward_advantage = radv[t];
      ep.steps[t].cost_advantage = cadv[t];
      ep.steps[t].reward_return = radv[t] + rvalues[t];
      ep.steps[t].cost_return = cadv[t] + cvalues[t];
    }
  }
}

Trajectory run_episode(const Env& env, const PolicyBundle& bundle, EnvMode mode, int horizon,
                       bool stochastic, std::mt19937_64& rng) {
  Trajectory traj;
  std::vector<double> state = env.reset(0);
  for (int t = 0; t < horizon; ++t) {
    const std::vector<double> obs = env.observe(state);
    std::vector<double> action =
        stochastic ? sample_action(bundle, obs, rng).action : greedy_action(bundle, obs);
    Transition tr = env.step(state, action, mode);
    const bool done = tr.done || (t + 1 == horizon);
    tr.done = done;
    state = tr.next_state;
    traj.transitions.push_back(std::move(tr));
    if (done) break;
  }
  return traj;
}

}  // namespace icrl
