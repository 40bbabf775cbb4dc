#include "icrl/constraint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icrl/checkpoint.hpp"

namespace icrl {

std::vector<double> ConstraintNet::project(std::span<const double> pair_features) const {
  std::vector<double> out;
  out.reserve(input_features.size());
  for (int i : input_features) {
    if (i < 0 || i >= static_cast<int>(pair_features.size())) {
      throw DimensionError("constraint net: feature index " + std::to_string(i) +
                           " outside pair feature vector of size " +
                           std::to_string(pair_features.size()));
    }
    out.push_back(pair_features[i]);
  }
  return out;
}

double ConstraintNet::score_features(std::span<const double> projected) const {
  return nn::forward(net, projected)[0];  // sigmoid output, already clamped
}

double ConstraintNet::score_pair(const Env& env, std::span<const double> state,
                                 std::span<const double> action) const {
  return score_features(project(env.pair_features(state, action)));
}

ConstraintNet make_constraint_net(const Env& env, const std::vector<int>& hidden,
                                  const std::vector<int>& input_features,
                                  std::mt19937_64& rng) {
  ConstraintNet z;
  if (input_features.empty()) {
    z.input_features.resize(env.pair_feature_dim());
    std::iota(z.input_features.begin(), z.input_features.end(), 0);
  } else {
    z.input_features = input_features;
  }
  for (int i : z.input_features) {
    if (i < 0 || i >= env.pair_feature_dim()) {
      throw ConfigError("constraint net: feature index " + std::to_string(i) +
                        " not provided by environment " + env.spec().name);
    }
    z.feature_names.push_back(env.spec().feature_names[i]);
  }
  std::vector<int> dims = {static_cast<int>(z.input_features.size())};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  z.net = nn::make_mlp(dims, nn::Activation::sigmoid, rng);
  return z;
}

double traj_score(const ConstraintNet& net, const Trajectory& traj, const Env& env) {
  double log_score = 0.0;
  for (const auto& tr : traj.transitions) {
    log_score += std::log(net.score_pair(env, tr.state, tr.action));
  }
  return std::exp(log_score);
}

TrajectoryWeights importance_weights(const ConstraintNet& current, const ConstraintNet& stale,
                                     const Trajectory& traj, const Env& env, double clip_low,
                                     double clip_high) {
  TrajectoryWeights w;
  w.per_step.reserve(traj.transitions.size());
  for (const auto& tr : traj.transitions) {
    const double num = current.score_pair(env, tr.state, tr.action);
    const double den = stale.score_pair(env, tr.state, tr.action);
    const double ratio = std::clamp(num / den, clip_low, clip_high);
    w.per_step.push_back(ratio);
    w.log_total += std::log(ratio);
  }
  w.total = std::exp(w.log_total);
  return w;
}

KlBounds kl_bounds(std::span<const double> trajectory_weights) {
  std::vector<double> logs;
  logs.reserve(trajectory_weights.size());
  for (double w : trajectory_weights) {
    if (!(w > 0.0)) throw NumericalError("kl_bounds: non-positive trajectory weight");
    logs.push_back(std::log(w));
  }
  return kl_bounds_log(logs);
}

KlBounds kl_bounds_log(std::span<const double> log_trajectory_weights) {
  const std::size_t n = log_trajectory_weights.size();
  if (n == 0) throw ConfigError("kl_bounds: empty weight sample");
  for (double lw : log_trajectory_weights) {
    if (!std::isfinite(lw)) throw NumericalError("kl_bounds: non-finite log weight");
  }
  const double max_log =
      *std::max_element(log_trajectory_weights.begin(), log_trajectory_weights.end());
  double sum_exp = 0.0;
  for (double lw : log_trajectory_weights) sum_exp += std::exp(lw - max_log);
  const double log_mean = max_log + std::log(sum_exp) - std::log(static_cast<double>(n));

  double mean_log = 0.0;
  double weighted_log = 0.0;  // E[(w / mean w) * log w]
  for (double lw : log_trajectory_weights) {
    mean_log += lw;
    weighted_log += std::exp(lw - log_mean) * lw;
  }
  mean_log /= static_cast<double>(n);
  weighted_log /= static_cast<double>(n);

  KlBounds b;
  b.forward_bound = 2.0 * log_mean;
  b.reverse_bound = weighted_log - mean_log;
  return b;
}

namespace {

struct PooledPair {
  std::vector<double> features;  // projected
  double coeff = 0.0;            // 1/N for expert pairs, 1/M for nominal pairs
  bool nominal = false;
  double stale_score = 1.0;      // zeta_theta_bar, frozen at phase entry
  double fixed_weight = 1.0;     // externally supplied importance weight
};

// Adds one pair's contribution to the ascent direction:
//   coeff_sign/count * w * dlog(zeta)/dtheta  +  delta/count * dzeta/dtheta.
// Both route through a single backward pass using
//   d/dzeta [w_log * log(zeta) + w_lin * zeta] = w_log / zeta + w_lin.
void accumulate_pair(const ConstraintNet& net, const PooledPair& pair, double weight,
                     double delta_coeff, nn::MlpGrads& into, nn::Tape& tape) {
  const double zeta = nn::forward(net.net, pair.features, tape)[0];
  const double sign = pair.nominal ? -1.0 : 1.0;
  const double output_grad = sign * weight / zeta + delta_coeff;
  const double g[1] = {output_grad};
  nn::accumulate_backward(net.net, tape, g, 1.0, into);
}

}  // namespace

nn::MlpGrads grad_step(const ConstraintNet& net, const std::vector<Trajectory>& expert_batch,
                       const std::vector<Trajectory>& nominal_batch,
                       const std::vector<std::vector<double>>& per_step_weights, const Env& env,
                       double regularizer_weight, bool per_step_regularizer) {
  if (!nominal_batch.empty() && per_step_weights.size() != nominal_batch.size()) {
    throw DimensionError("grad_step: need one weight array per nominal trajectory");
  }
  for (const auto& ws : per_step_weights)
    for (double w : ws)
      if (!std::isfinite(w)) throw NumericalError("grad_step: non-finite importance weight");

  nn::MlpGrads direction = nn::zero_grads_like(net.net);
  nn::Tape tape;
  const double inv_n = expert_batch.empty() ? 0.0 : 1.0 / static_cast<double>(expert_batch.size());
  const double inv_m =
      nominal_batch.empty() ? 0.0 : 1.0 / static_cast<double>(nominal_batch.size());

  auto process = [&](const std::vector<Trajectory>& batch, bool nominal, double inv_count,
                     const std::vector<std::vector<double>>* weights) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Trajectory& traj = batch[i];
      const double traj_zeta =
          per_step_regularizer ? 0.0 : traj_score(net, traj, env);
      for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
        const auto& tr = traj.transitions[t];
        PooledPair pair;
        pair.features = net.project(env.pair_features(tr.state, tr.action));
        pair.nominal = nominal;
        double w = 1.0;
        if (weights) {
          if (t >= (*weights)[i].size()) {
            throw DimensionError("grad_step: weight array shorter than trajectory");
          }
          w = (*weights)[i][t];
        }
        double delta_coeff;
        if (per_step_regularizer) {
          // R = -delta * sum |1 - zeta|; ascent adds +delta * dzeta.
          delta_coeff = regularizer_weight * inv_count;
        } else {
          // Trajectory-level literal form: dzeta(tau)/dtheta restricted to
          // this step is zeta(tau)/zeta_t * dzeta_t.
          const double zeta_t = net.score_pair(env, tr.state, tr.action);
          delta_coeff = regularizer_weight * inv_count * traj_zeta / zeta_t;
        }
        accumulate_pair(net, pair, w * inv_count, delta_coeff, direction, tape);
      }
    }
  };

  process(expert_batch, false, inv_n, nullptr);
  process(nominal_batch, true, inv_m, &per_step_weights);
  return direction;
}

PhaseReport backward_phase(ConstraintNet& net, const std::vector<Trajectory>& expert_data,
                           const std::vector<Trajectory>& nominal_data, const Env& env,
                           const BackwardConfig& cfg, nn::AdamState& opt,
                           std::mt19937_64& rng) {
  PhaseReport report;
  if (cfg.iterations <= 0) return report;

  const ConstraintNet stale = net;  // theta_bar for this phase
  const double inv_n =
      expert_data.empty() ? 0.0 : 1.0 / static_cast<double>(expert_data.size());
  const double inv_m =
      nominal_data.empty() ? 0.0 : 1.0 / static_cast<double>(nominal_data.size());

  std::vector<PooledPair> pool;
  for (const auto& traj : expert_data) {
    for (const auto& tr : traj.transitions) {
      PooledPair p;
      p.features = net.project(env.pair_features(tr.state, tr.action));
      p.nominal = false;
      p.coeff = inv_n;
      pool.push_back(std::move(p));
    }
  }
  for (const auto& traj : nominal_data) {
    for (const auto& tr : traj.transitions) {
      PooledPair p;
      p.features = net.project(env.pair_features(tr.state, tr.action));
      p.nominal = true;
      p.coeff = inv_m;
      p.stale_score = stale.score_features(p.features);
      pool.push_back(std::move(p));
    }
  }
  if (pool.empty()) throw ConfigError("backward_phase: no state-action pairs to train on");

  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  const int minibatch = cfg.minibatch_size > 0 ? cfg.minibatch_size
                                               : static_cast<int>(pool.size());

  nn::MlpGrads direction = nn::zero_grads_like(net.net);
  nn::MlpGrads loss_grads = nn::zero_grads_like(net.net);
  nn::Tape tape;

  auto apply_ascent = [&]() {
    loss_grads.zero();
    loss_grads.add_scaled(direction, -1.0);
    nn::adam_step_inplace(net.net, loss_grads, opt);
  };

  // Returns true when the phase must stop.
  auto check_bounds = [&]() {
    if (nominal_data.empty()) return false;
    std::vector<double> log_weights;
    log_weights.reserve(nominal_data.size());
    for (const auto& traj : nominal_data) {
      log_weights.push_back(importance_weights(net, stale, traj, env, cfg.weight_clip_low,
                                               cfg.weight_clip_high)
                                .log_total);
    }
    report.final_bounds = kl_bounds_log(log_weights);
    return cfg.use_early_stopping &&
           (report.final_bounds.forward_bound >= cfg.max_forward_kl ||
            report.final_bounds.reverse_bound >= cfg.max_reverse_kl);
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    if (cfg.per_step_regularizer) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(minibatch)) {
        const std::size_t end = std::min(order.size(), start + minibatch);
        direction.zero();
        // Scale so each minibatch estimates the full-pool gradient.
        const double pool_scale =
            static_cast<double>(pool.size()) / static_cast<double>(end - start);
        for (std::size_t k = start; k < end; ++k) {
          const PooledPair& pair = pool[order[k]];
          double w = 1.0;
          if (pair.nominal && cfg.use_importance_sampling) {
            const double zeta = net.score_features(pair.features);
            w = std::clamp(zeta / pair.stale_score, cfg.weight_clip_low, cfg.weight_clip_high);
            if (!std::isfinite(w)) {
              throw NumericalError("backward_phase: non-finite importance weight");
            }
          }
          const double delta_coeff = cfg.regularizer_weight * pair.coeff;
          accumulate_pair(net, pair, w * pair.coeff, delta_coeff, direction, tape);
        }
        direction.scale(pool_scale);
        apply_ascent();
      }
    } else {
      // Literal trajectory-level regularizer couples all pairs of a
      // trajectory through zeta(tau); full-batch steps only.
      std::vector<std::vector<double>> weights(nominal_data.size());
      for (std::size_t i = 0; i < nominal_data.size(); ++i) {
        if (cfg.use_importance_sampling) {
          weights[i] = importance_weights(net, stale, nominal_data[i], env,
                                          cfg.weight_clip_low, cfg.weight_clip_high)
                           .per_step;
        } else {
          weights[i].assign(nominal_data[i].transitions.size(), 1.0);
        }
      }
      direction = grad_step(net, expert_data, nominal_data, weights, env,
                            cfg.regularizer_weight, false);
      apply_ascent();
    }
    report.iterations_run = it + 1;
    if (check_bounds()) {
      report.early_stopped = true;
      break;
    }
  }
  return report;
}

nlohmann::json constraint_net_to_json(const ConstraintNet& net) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "constraint_net";
  j["net"] = mlp_to_json(net.net);
  j["input_features"] = net.input_features;
  j["feature_names"] = net.feature_names;
  return j;
}

ConstraintNet constraint_net_from_json(const nlohmann::json& j) {
  check_container(j, "constraint_net");
  ConstraintNet z;
  z.net = mlp_from_json(j.at("net"));
  z.input_features = j.at("input_features").get<std::vector<int>>();
  z.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  if (z.net.output_activation != nn::Activation::sigmoid || z.net.output_dim() != 1) {
    throw ConfigError("constraint net container: expected single sigmoid output");
  }
  return z;
}

}  // namespace icrl
