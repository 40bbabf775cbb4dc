#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "icrl/env.hpp"

namespace icrl::tabular {

// Explicit finite-horizon deterministic MDP. Flat (state, action) indexing:
// idx = state * num_actions + action.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  int initial_state = 0;
  int horizon = 0;
  double discount = 1.0;
  std::vector<int> next_state;  // size num_states * num_actions
  std::vector<double> reward;   // size num_states * num_actions

  int idx(int s, int a) const { return s * num_actions + a; }
  std::size_t pair_count() const {
    return static_cast<std::size_t>(num_states) * num_actions;
  }
  void validate() const;
};

// Exact MaxEnt solution for trajectory weights exp(beta * r(tau)) * zeta(tau),
// where zeta(tau) is the product of per-pair feasibility scores in [0, 1]
// (1 everywhere = unconstrained; {0,1} = hard constraints).
struct SoftSolveResult {
  // Nonstationary policy: probs[t][s * A + a]. Infeasible pairs get 0.
  std::vector<std::vector<double>> policy;
  double log_partition = 0.0;  // log Z from the initial state
};

// Backward soft-value recursion. Throws ConfigError when no trajectory has
// positive weight (empty feasible set).
SoftSolveResult soft_solve(const TabularMDP& mdp, double beta,
                           std::span<const double> feasibility);

// All action sequences of length `horizon` starting from the initial state.
struct EnumeratedTrajectory {
  std::vector<int> actions;
  std::vector<int> states;      // length horizon + 1
  double discounted_reward = 0.0;
};

// Throws ConfigError when num_actions^horizon exceeds `cap`.
std::vector<EnumeratedTrajectory> enumerate_trajectories(const TabularMDP& mdp,
                                                         std::size_t cap = 2'000'000);

// Probability of one enumerated trajectory under the soft_solve policy
// (product of per-step policy probabilities).
double trajectory_prob(const TabularMDP& mdp, const SoftSolveResult& solution,
                       const EnumeratedTrajectory& traj);

// Distribution over an enumeration, via the policy product.
std::vector<double> trajectory_distribution(const TabularMDP& mdp,
                                            const SoftSolveResult& solution,
                                            const std::vector<EnumeratedTrajectory>& trajs);

// Product of per-pair scores along a trajectory.
double trajectory_score(const TabularMDP& mdp, std::span<const double> per_pair_scores,
                        const EnumeratedTrajectory& traj);

// (KL(p||q), KL(q||p)) over a common enumeration. Mass of p where q is zero
// yields an explicit +infinity.
std::pair<double, double> exact_kl(std::span<const double> p, std::span<const double> q);

// One trajectory sampled from the soft_solve policy.
EnumeratedTrajectory sample_trajectory(const TabularMDP& mdp, const SoftSolveResult& solution,
                                       std::mt19937_64& rng);

// Wraps a TabularMDP as an Env (one-hot observations), so the forward solver
// can run on hand-built finite MDPs.
class TabularEnv final : public Env {
 public:
  TabularEnv(TabularMDP mdp, std::string name);

  std::vector<double> reset(std::uint64_t seed) const override;
  Transition step(std::span<const double> state, std::span<const double> action,
                  EnvMode mode) const override;
  bool true_violation(std::span<const double>, std::span<const double>) const override {
    return false;
  }
  std::vector<double> observe(std::span<const double> state) const override;
  std::vector<double> pair_features(std::span<const double> state,
                                    std::span<const double> action) const override;
  bool is_tabular() const override { return true; }
  TabularMDP to_tabular() const override { return mdp_; }

 private:
  TabularMDP mdp_;
};

}  // namespace icrl::tabular
