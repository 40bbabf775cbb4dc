#pragma once

#include <random>
#include <vector>

#include "icrl/constraint.hpp"
#include "icrl/env.hpp"
#include "icrl/ppo.hpp"

namespace icrl {

// Both baselines reuse the constraint-net container so their outputs are
// drop-in replacements for a learned zeta.
using DiscriminatorNet = ConstraintNet;

struct BcConfig {
  int epochs = 200;
  int minibatch_size = 0;  // 0 = full batch
  double learning_rate = 0.01;
  std::vector<int> hidden = {20};
  std::vector<int> input_features;  // empty = all
};

struct BcResult {
  DiscriminatorNet net;
  std::vector<double> epoch_losses;  // mean cross-entropy after each epoch
};

// Plain cross-entropy classifier: expert pairs labeled 1, nominal pairs 0.
// Throws ConfigError when either class is empty.
BcResult bc_train(const std::vector<Trajectory>& expert_data,
                  const std::vector<Trajectory>& nominal_data, const Env& env,
                  const BcConfig& cfg, std::mt19937_64& rng);

// Shaped reward r + log(zeta); the score arrives pre-clamped into (0, 1).
double gc_reward(double reward, double zeta_score);

struct GcConfig {
  int outer_iterations = 25;
  int discriminator_epochs = 1;
  int discriminator_minibatch = 64;
  double discriminator_learning_rate = 0.01;
  std::vector<int> hidden = {20};
  std::vector<int> input_features;
  PpoConfig ppo;
};

struct GcResult {
  DiscriminatorNet discriminator;
  ForwardSolver solver;
  SolveReport report;
};

// Adversarial variant with the nominal reward known: alternates discriminator
// cross-entropy updates (expert vs current policy pairs) with unconstrained
// PPO on the shaped reward.
GcResult gc_train(const Env& env, const std::vector<Trajectory>& expert_data,
                  const GcConfig& cfg, std::mt19937_64& rng);

}  // namespace icrl
