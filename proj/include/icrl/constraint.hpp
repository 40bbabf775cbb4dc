#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "icrl/env.hpp"
#include "icrl/nn.hpp"

namespace icrl {

// Learned per-pair feasibility score zeta(s, a) in (0, 1); 1 - zeta is the
// cost fed to the forward solver. The net sees a declared subset of the
// environment's canonical (state, action) feature vector so that a trained
// net can be transferred to any environment exposing the same features.
struct ConstraintNet {
  nn::MlpParams net;  // sigmoid output, single unit
  std::vector<int> input_features;
  std::vector<std::string> feature_names;

  std::vector<double> project(std::span<const double> pair_features) const;
  double score_features(std::span<const double> projected) const;
  double score_pair(const Env& env, std::span<const double> state,
                    std::span<const double> action) const;
};

// `input_features` empty selects the whole feature vector. `hidden` empty
// builds a plain logistic model (used for tabular parameterizations).
ConstraintNet make_constraint_net(const Env& env, const std::vector<int>& hidden,
                                  const std::vector<int>& input_features,
                                  std::mt19937_64& rng);

struct BackwardConfig {
  int iterations = 10;  // B
  double regularizer_weight = 0.5;
  double max_forward_kl = 10.0;
  double max_reverse_kl = 2.5;
  double learning_rate = 0.01;
  int minibatch_size = 64;
  bool use_importance_sampling = true;
  bool use_early_stopping = true;
  bool per_step_regularizer = true;  // false = literal trajectory-level form
  double weight_clip_low = 1e-3;
  double weight_clip_high = 1e3;
};

// Product of per-step scores, evaluated in log space.
double traj_score(const ConstraintNet& net, const Trajectory& traj, const Env& env);

struct TrajectoryWeights {
  std::vector<double> per_step;  // clipped ratios zeta_theta / zeta_theta_bar
  double log_total = 0.0;
  double total = 1.0;
};

TrajectoryWeights importance_weights(const ConstraintNet& current, const ConstraintNet& stale,
                                     const Trajectory& traj, const Env& env,
                                     double clip_low = 1e-3, double clip_high = 1e3);

struct KlBounds {
  double forward_bound = 0.0;
  double reverse_bound = 0.0;
};

// Importance-weight bounds on the divergence between the sampling policy and
// the policy induced by the current net: forward 2*log(mean w), reverse
// mean[(w - mean w) * log w] / mean w.
KlBounds kl_bounds(std::span<const double> trajectory_weights);
// Same from log-weights; the stable path for long trajectories.
KlBounds kl_bounds_log(std::span<const double> log_trajectory_weights);

// Full-batch ascent direction on L(theta) + R(theta): expert term minus the
// importance-weighted nominal term plus the sparsity regularizer.
// `per_step_weights` holds one weight per nominal step (outer index =
// trajectory). Throws NumericalError on non-finite weights.
nn::MlpGrads grad_step(const ConstraintNet& net, const std::vector<Trajectory>& expert_batch,
                       const std::vector<Trajectory>& nominal_batch,
                       const std::vector<std::vector<double>>& per_step_weights, const Env& env,
                       double regularizer_weight, bool per_step_regularizer = true);

struct PhaseReport {
  int iterations_run = 0;
  KlBounds final_bounds;
  bool early_stopped = false;
};

// Up to cfg.iterations minibatched ascent epochs over the pooled per-step
// pairs; the sampling-time parameters theta_bar are frozen at entry and the
// phase stops the first time either KL bound crosses its threshold.
PhaseReport backward_phase(ConstraintNet& net, const std::vector<Trajectory>& expert_data,
                           const std::vector<Trajectory>& nominal_data, const Env& env,
                           const BackwardConfig& cfg, nn::AdamState& opt,
                           std::mt19937_64& rng);

nlohmann::json constraint_net_to_json(const ConstraintNet& net);
ConstraintNet constraint_net_from_json(const nlohmann::json& j);

}  // namespace icrl
