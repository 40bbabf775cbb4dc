#include "icrl/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace icrl::tabular {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}
}  // namespace

void TabularMDP::validate() const {
  if (num_states <= 0 || num_actions <= 0) throw ConfigError("tabular mdp: empty state/action set");
  if (horizon <= 0) throw ConfigError("tabular mdp: horizon must be positive");
  if (initial_state < 0 || initial_state >= num_states) {
    throw ConfigError("tabular mdp: initial state out of range");
  }
  if (next_state.size() != pair_count() || reward.size() != pair_count()) {
    throw ConfigError("tabular mdp: table sizes do not match state/action counts");
  }
  for (int t : next_state) {
    if (t < 0 || t >= num_states) throw ConfigError("tabular mdp: transition target out of range");
  }
}

SoftSolveResult soft_solve(const TabularMDP& mdp, double beta,
                           std::span<const double> feasibility) {
  mdp.validate();
  if (feasibility.size() != mdp.pair_count()) {
    throw DimensionError("soft_solve: feasibility size " + std::to_string(feasibility.size()) +
                         " does not match pair count " + std::to_string(mdp.pair_count()));
  }
  std::vector<double> log_feas(feasibility.size());
  for (std::size_t i = 0; i < feasibility.size(); ++i) {
    const double f = feasibility[i];
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("soft_solve: feasibility outside [0,1]");
    log_feas[i] = (f > 0.0) ? std::log(f) : kNegInf;
  }

  SoftSolveResult result;
  result.policy.assign(mdp.horizon, std::vector<double>(mdp.pair_count(), 0.0));

  // soft_value[s] holds V_{t+1}; sweep backwards over time.
  std::vector<double> soft_value(mdp.num_states, 0.0);
  std::vector<double> next_value(mdp.num_states, 0.0);
  std::vector<double> q(mdp.num_actions, 0.0);
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    const double step_scale = beta * std::pow(mdp.discount, t);
    for (int s = 0; s < mdp.num_states; ++s) {
      for (int a = 0; a < mdp.num_actions; ++a) {
        const int i = mdp.idx(s, a);
        q[a] = step_scale * mdp.reward[i] + log_feas[i] + soft_value[mdp.next_state[i]];
      }
      const double v = log_sum_exp(q);
      next_value[s] = v;
      if (v != kNegInf) {
        for (int a = 0; a < mdp.num_actions; ++a) {
          result.policy[t][mdp.idx(s, a)] = (q[a] == kNegInf) ? 0.0 : std::exp(q[a] - v);
        }
      }
    }
    soft_value.swap(next_value);
  }
  result.log_partition = soft_value[mdp.initial_state];
  if (result.log_partition == kNegInf) {
    throw ConfigError("soft_solve: no feasible trajectory from the initial state");
  }
  return result;
}

std::vector<EnumeratedTrajectory> enumerate_trajectories(const TabularMDP& mdp,
                                                         std::size_t cap) {
  mdp.validate();
  double count = 1.0;
  for (int t = 0; t < mdp.horizon; ++t) {
    count *= mdp.num_actions;
    if (count > static_cast<double>(cap)) {
      throw ConfigError("enumerate_trajectories: more than " + std::to_string(cap) +
                        " trajectories");
    }
  }
  std::vector<EnumeratedTrajectory> out;
  out.reserve(static_cast<std::size_t>(count));
  EnumeratedTrajectory cur;
  cur.states.push_back(mdp.initial_state);
  // Depth-first over action sequences.
  auto recurse = [&](auto&& self, int t, double reward_acc) -> void {
    if (t == mdp.horizon) {
      cur.discounted_reward = reward_acc;
      out.push_back(cur);
      return;
    }
    const int s = cur.states.back();
    for (int a = 0; a < mdp.num_actions; ++a) {
      const int i = mdp.idx(s, a);
      cur.actions.push_back(a);
      cur.states.push_back(mdp.next_state[i]);
      self(self, t + 1, reward_acc + std::pow(mdp.discount, t) * mdp.reward[i]);
      cur.actions.pop_back();
      cur.states.pop_back();
    }
  };
  recurse(recurse, 0, 0.0);
  return out;
}

double trajectory_prob(const TabularMDP& mdp, const SoftSolveResult& solution,
                       const EnumeratedTrajectory& traj) {
  double logp = 0.0;
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    const double p = solution.policy[t][mdp.idx(traj.states[t], traj.actions[t])];
    if (p <= 0.0) return 0.0;
    logp += std::log(p);
  }
  return std::exp(logp);
}

std::vector<double> trajectory_distribution(const TabularMDP& mdp,
                                            const SoftSolveResult& solution,
                                            const std::vector<EnumeratedTrajectory>& trajs) {
  std::vector<double> probs(trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) probs[i] = trajectory_prob(mdp, solution, trajs[i]);
  return probs;
}

double trajectory_score(const TabularMDP& mdp, std::span<const double> per_pair_scores,
                        const EnumeratedTrajectory& traj) {
  double log_score = 0.0;
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    const double f = per_pair_scores[mdp.idx(traj.states[t], traj.actions[t])];
    if (f <= 0.0) return 0.0;
    log_score += std::log(f);
  }
  return std::exp(log_score);
}

std::pair<double, double> exact_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("exact_kl: distribution sizes differ");
  constexpr double inf = std::numeric_limits<double>::infinity();
  double forward = 0.0;
  double reverse = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      if (q[i] <= 0.0) {
        forward = inf;
      } else if (forward != inf) {
        forward += p[i] * std::log(p[i] / q[i]);
      }
    }
    if (q[i] > 0.0) {
      if (p[i] <= 0.0) {
        reverse = inf;
      } else if (reverse != inf) {
        reverse += q[i] * std::log(q[i] / p[i]);
      }
    }
  }
  return {forward, reverse};
}

EnumeratedTrajectory sample_trajectory(const TabularMDP& mdp, const SoftSolveResult& solution,
                                       std::mt19937_64& rng) {
  EnumeratedTrajectory traj;
  traj.states.push_back(mdp.initial_state);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < mdp.horizon; ++t) {
    const int s = traj.states.back();
    const double u = unif(rng);
    double acc = 0.0;
    int chosen = mdp.num_actions - 1;
    for (int a = 0; a < mdp.num_actions; ++a) {
      acc += solution.policy[t][mdp.idx(s, a)];
      if (u <= acc) {
        chosen = a;
        break;
      }
    }
    const int i = mdp.idx(s, chosen);
    traj.discounted_reward += std::pow(mdp.discount, t) * mdp.reward[i];
    traj.actions.push_back(chosen);
    traj.states.push_back(mdp.next_state[i]);
  }
  return traj;
}

TabularEnv::TabularEnv(TabularMDP mdp, std::string name) : mdp_(std::move(mdp)) {
  mdp_.validate();
  spec_.name = std::move(name);
  spec_.state_dim = 1;
  spec_.discrete_actions = true;
  spec_.num_actions = mdp_.num_actions;
  spec_.horizon = mdp_.horizon;
  spec_.discount = mdp_.discount;
  spec_.observation_dim = mdp_.num_states;
  for (int s = 0; s < mdp_.num_states; ++s) spec_.feature_names.push_back("s" + std::to_string(s));
  for (int a = 0; a < mdp_.num_actions; ++a) spec_.feature_names.push_back("a" + std::to_string(a));
}

std::vector<double> TabularEnv::reset(std::uint64_t) const {
  return {static_cast<double>(mdp_.initial_state)};
}

Transition TabularEnv::step(std::span<const double> state, std::span<const double> action,
                            EnvMode) const {
  const int s = static_cast<int>(state[0]);
  const int a = static_cast<int>(action[0]);
  if (a < 0 || a >= mdp_.num_actions) {
    throw ConfigError("tabular env: invalid action index " + std::to_string(a));
  }
  Transition tr;
  tr.state = {static_cast<double>(s)};
  tr.action = {static_cast<double>(a)};
  tr.next_state = {static_cast<double>(mdp_.next_state[mdp_.idx(s, a)])};
  tr.reward = mdp_.reward[mdp_.idx(s, a)];
  tr.done = false;
  return tr;
}

std::vector<double> TabularEnv::observe(std::span<const double> state) const {
  std::vector<double> obs(mdp_.num_states, 0.0);
  obs[static_cast<int>(state[0])] = 1.0;
  return obs;
}

std::vector<double> TabularEnv::pair_features(std::span<const double> state,
                                              std::span<const double> action) const {
  std::vector<double> f(mdp_.num_states + mdp_.num_actions, 0.0);
  f[static_cast<int>(state[0])] = 1.0;
  f[mdp_.num_states + static_cast<int>(action[0])] = 1.0;
  return f;
}

}  // namespace icrl::tabular
