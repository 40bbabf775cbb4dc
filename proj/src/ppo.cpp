#include "icrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace icrl {

ForwardSolver make_forward_solver(PolicyBundle bundle, double learning_rate) {
  ForwardSolver s;
  s.policy_opt = nn::make_adam(bundle.policy_net, learning_rate);
  s.reward_value_opt = nn::make_adam(bundle.reward_value_net, learning_rate);
  s.cost_value_opt = nn::make_adam(bundle.cost_value_net, learning_rate);
  s.log_std_opt = nn::make_vector_adam(bundle.log_std.size(), learning_rate);
  s.bundle = std::move(bundle);
  return s;
}

double lagrangian_step(double lambda, double observed_cost, double budget, double lr) {
  return std::max(0.0, lambda + lr * (observed_cost - budget));
}

namespace {

struct FlatStep {
  const RolloutStep* step;
};

void normalize(std::vector<double>& v) {
  if (v.empty()) return;
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double inv = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& x : v) x = (x - mean) * inv;
}

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

PpoStats ppo_update(ForwardSolver& solver, const RolloutBatch& batch, const PpoConfig& cfg,
                    std::mt19937_64& rng) {
  PolicyBundle& bundle = solver.bundle;
  const PolicyBundle snapshot = bundle;
  const nn::AdamState policy_opt_snap = solver.policy_opt;
  const nn::AdamState rv_opt_snap = solver.reward_value_opt;
  const nn::AdamState cv_opt_snap = solver.cost_value_opt;
  const nn::VectorAdamState ls_opt_snap = solver.log_std_opt;

  std::vector<FlatStep> flat;
  for (const auto& ep : batch.episodes)
    for (const auto& s : ep.steps) flat.push_back({&s});
  PpoStats stats;
  if (flat.empty()) return stats;

  std::vector<int> order(flat.size());
  std::iota(order.begin(), order.end(), 0);

  nn::MlpGrads policy_grads = nn::zero_grads_like(bundle.policy_net);
  nn::MlpGrads rv_grads = nn::zero_grads_like(bundle.reward_value_net);
  nn::MlpGrads cv_grads = nn::zero_grads_like(bundle.cost_value_net);
  std::vector<double> log_std_grads(bundle.log_std.size(), 0.0);
  nn::Tape tape;

  try {
    const double lambda = bundle.lambda;
    for (int epoch = 0; epoch < cfg.epochs && !stats.kl_stopped; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.minibatch_size);
        const std::size_t mb = end - start;

        std::vector<double> radv(mb), cadv(mb);
        for (std::size_t k = 0; k < mb; ++k) {
          radv[k] = flat[order[start + k]].step->reward_advantage;
          cadv[k] = flat[order[start + k]].step->cost_advantage;
        }
        if (cfg.normalize_advantages) {
          normalize(radv);
          normalize(cadv);
        }

        policy_grads.zero();
        rv_grads.zero();
        cv_grads.zero();
        std::fill(log_std_grads.begin(), log_std_grads.end(), 0.0);

        double kl_acc = 0.0;
        double pg_loss_acc = 0.0;
        double rv_loss_acc = 0.0;
        double cv_loss_acc = 0.0;
        const double inv_mb = 1.0 / static_cast<double>(mb);

        for (std::size_t k = 0; k < mb; ++k) {
          const RolloutStep& s = *flat[order[start + k]].step;
          const double advantage = (radv[k] - lambda * cadv[k]) / (1.0 + lambda);

          const std::vector<double> logits =
              nn::forward_logits(bundle.policy_net, s.obs, &tape);
          double new_logp = 0.0;
          std::vector<double> logp;
          if (bundle.discrete) {
            logp = log_softmax(logits);
            new_logp = logp[static_cast<int>(s.action[0])];
          } else {
            for (std::size_t i = 0; i < logits.size(); ++i) {
              const double mean = std::tanh(logits[i]);
              const double sigma = std::exp(bundle.log_std[i]);
              const double z = (s.action[i] - mean) / sigma;
              new_logp += -0.5 * z * z - bundle.log_std[i] -
                          0.5 * std::log(2.0 * std::numbers::pi);
            }
          }
          const double log_ratio = new_logp - s.log_prob;
          const double ratio = std::exp(log_ratio);
          kl_acc += (ratio - 1.0) - log_ratio;

          const double unclipped = ratio * advantage;
          const double clipped =
              std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantage;
          pg_loss_acc += -std::min(unclipped, clipped);
          // dLoss/d log pi: active only when the unclipped branch is the min.
          const double dloss_dlogp =
              (unclipped <= clipped) ? -advantage * ratio * inv_mb : 0.0;

          if (bundle.discrete) {
            std::vector<double> probs(logp.size());
            for (std::size_t j = 0; j < logp.size(); ++j) probs[j] = std::exp(logp[j]);
            std::vector<double> logit_grad(probs.size(), 0.0);
            const int a = static_cast<int>(s.action[0]);
            for (std::size_t j = 0; j < probs.size(); ++j) {
              logit_grad[j] = dloss_dlogp * ((j == static_cast<std::size_t>(a)) - probs[j]);
            }
            if (bundle.entropy_coeff > 0.0) {
              double entropy = 0.0;
              for (double p : probs)
                if (p > 0.0) entropy -= p * std::log(p);
              for (std::size_t j = 0; j < probs.size(); ++j) {
                if (probs[j] > 0.0) {
                  const double dh = -probs[j] * (std::log(probs[j]) + entropy);
                  logit_grad[j] -= bundle.entropy_coeff * inv_mb * dh;
                }
              }
            }
            nn::accumulate_backward_from_logits(bundle.policy_net, tape, logit_grad, 1.0,
                                                policy_grads);
          } else {
            std::vector<double> logit_grad(logits.size(), 0.0);
            for (std::size_t i = 0; i < logits.size(); ++i) {
              const double mean = std::tanh(logits[i]);
              const double sigma = std::exp(bundle.log_std[i]);
              const double z = (s.action[i] - mean) / sigma;
              // d logp / d mean, through the tanh squash.
              logit_grad[i] = dloss_dlogp * (z / sigma) * (1.0 - mean * mean);
              // d logp / d log_std = z^2 - 1; entropy contributes +1 per dim.
              log_std_grads[i] += dloss_dlogp * (z * z - 1.0) -
                                  bundle.entropy_coeff * inv_mb;
            }
            nn::accumulate_backward_from_logits(bundle.policy_net, tape, logit_grad, 1.0,
                                                policy_grads);
          }

          const double rv = nn::forward_logits(bundle.reward_value_net, s.obs, &tape)[0];
          rv_loss_acc += 0.5 * (rv - s.reward_return) * (rv - s.reward_return);
          const double rv_grad = (rv - s.reward_return) * inv_mb;
          nn::accumulate_backward_from_logits(bundle.reward_value_net, tape, {&rv_grad, 1},
                                              1.0, rv_grads);

          const double cv = nn::forward_logits(bundle.cost_value_net, s.obs, &tape)[0];
          cv_loss_acc += 0.5 * (cv - s.cost_return) * (cv - s.cost_return);
          const double cv_grad = (cv - s.cost_return) * inv_mb;
          nn::accumulate_backward_from_logits(bundle.cost_value_net, tape, {&cv_grad, 1}, 1.0,
                                              cv_grads);
        }

        stats.approx_kl = kl_acc * inv_mb;
        stats.policy_loss = pg_loss_acc * inv_mb;
        stats.reward_value_loss = rv_loss_acc * inv_mb;
        stats.cost_value_loss = cv_loss_acc * inv_mb;
        if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.reward_value_loss) ||
            !std::isfinite(stats.cost_value_loss) || !std::isfinite(stats.approx_kl)) {
          throw NumericalError("ppo_update: non-finite loss");
        }
        if (stats.approx_kl > cfg.target_kl) {
          stats.kl_stopped = true;
          break;  // skip this minibatch's update and stop the epoch loop
        }

        nn::adam_step_inplace(bundle.policy_net, policy_grads, solver.policy_opt);
        nn::adam_step_inplace(bundle.reward_value_net, rv_grads, solver.reward_value_opt);
        nn::adam_step_inplace(bundle.cost_value_net, cv_grads, solver.cost_value_opt);
        if (!bundle.discrete) {
          nn::adam_step_inplace(bundle.log_std, log_std_grads, solver.log_std_opt);
        }
        stats.minibatches += 1;
      }
    }
  } catch (const NumericalError&) {
    bundle = snapshot;
    solver.policy_opt = policy_opt_snap;
    solver.reward_value_opt = rv_opt_snap;
    solver.cost_value_opt = cv_opt_snap;
    solver.log_std_opt = ls_opt_snap;
    throw;
  }
  return stats;
}

SolveReport solve_forward(ForwardSolver& solver, const Env& env, const CostFn& cost_fn,
                          EnvMode mode, const PpoConfig& cfg, std::mt19937_64& rng,
                          const RewardTransform* reward_transform) {
  SolveReport report;
  const int horizon = cfg.horizon > 0 ? cfg.horizon : env.spec().horizon;
  std::vector<double> cost_history;
  for (int round = 0; round < cfg.rounds; ++round) {
    RolloutBatch batch = collect_rollouts(env, solver.bundle, mode, cfg.steps_per_round,
                                          horizon, cost_fn, rng, reward_transform);
    compute_advantages(batch, cfg.reward_gae_gamma, cfg.reward_gae_lambda, cfg.cost_gae_gamma,
                       cfg.cost_gae_lambda);
    ppo_update(solver, batch, cfg, rng);

    const double observed_cost = batch.mean_discounted_cost(cfg.cost_gae_gamma);
    solver.bundle.lambda = lagrangian_step(solver.bundle.lambda, observed_cost,
                                           solver.bundle.budget, cfg.lambda_lr);

    report.rounds_run = round + 1;
    report.env_steps += batch.total_steps();
    report.final_reward = batch.mean_episode_reward();
    cost_history.push_back(observed_cost);
  }
  const int window = std::min<int>(cfg.convergence_window, static_cast<int>(cost_history.size()));
  if (window > 0) {
    double acc = 0.0;
    for (int k = 0; k < window; ++k) acc += cost_history[cost_history.size() - 1 - k];
    report.final_cost = acc / window;
    report.converged = static_cast<int>(cost_history.size()) >= cfg.convergence_window &&
                       report.final_cost <= solver.bundle.budget + cfg.cost_tolerance;
  }
  return report;
}

}  // namespace icrl
