#pragma once

#include <optional>
#include <random>

#include "icrl/env.hpp"
#include "icrl/policy.hpp"
#include "icrl/rollout.hpp"

namespace icrl {

struct PpoConfig {
  int steps_per_round = 2000;
  int rounds = 40;
  int minibatch_size = 64;
  int epochs = 10;
  double clip = 0.2;
  double target_kl = 0.01;
  double learning_rate = 3e-4;
  double reward_gae_gamma = 0.99;
  double reward_gae_lambda = 0.95;
  double cost_gae_gamma = 0.99;
  double cost_gae_lambda = 0.95;
  double lambda_lr = 0.1;
  // Per-minibatch advantage normalization. Disable to keep the absolute
  // reward scale (the MaxEnt temperature only means something then).
  bool normalize_advantages = true;
  // Convergence: mean J^c over the trailing window <= budget + tolerance.
  double cost_tolerance = 0.1;
  int convergence_window = 5;
  int horizon = 0;  // 0 = environment default
};

// Policy bundle plus its optimizer states; kept together so the forward
// solver can be warm-started across outer iterations.
struct ForwardSolver {
  PolicyBundle bundle;
  nn::AdamState policy_opt;
  nn::AdamState reward_value_opt;
  nn::AdamState cost_value_opt;
  nn::VectorAdamState log_std_opt;
};

ForwardSolver make_forward_solver(PolicyBundle bundle, double learning_rate);

struct PpoStats {
  double policy_loss = 0.0;
  double reward_value_loss = 0.0;
  double cost_value_loss = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
  bool kl_stopped = false;
};

// One clipped-surrogate update on (reward_adv - lambda * cost_adv) with both
// critics regressed to their returns. Epochs stop early once the estimated
// policy KL exceeds target_kl. Throws NumericalError (bundle restored) on
// non-finite losses.
PpoStats ppo_update(ForwardSolver& solver, const RolloutBatch& batch, const PpoConfig& cfg,
                    std::mt19937_64& rng);

// Projected dual ascent: max(0, lambda + lr * (observed_cost - budget)).
double lagrangian_step(double lambda, double observed_cost, double budget, double lr);

struct SolveReport {
  bool converged = false;
  double final_cost = 0.0;    // trailing-window mean of J^c
  double final_reward = 0.0;
  int rounds_run = 0;
  long env_steps = 0;
};

// Lagrangian constrained PPO against the given per-pair cost. Non-convergence
// after the round budget is reported in the result, never silently dropped.
SolveReport solve_forward(ForwardSolver& solver, const Env& env, const CostFn& cost_fn,
                          EnvMode mode, const PpoConfig& cfg, std::mt19937_64& rng,
                          const RewardTransform* reward_transform = nullptr);

}  // namespace icrl
