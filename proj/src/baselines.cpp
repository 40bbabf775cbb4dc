#include "icrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icrl {

namespace {

struct LabeledPair {
  std::vector<double> features;  // projected
  double label = 0.0;
};

std::vector<LabeledPair> pool_pairs(const DiscriminatorNet& net,
                                    const std::vector<Trajectory>& trajs, const Env& env,
                                    double label) {
  std::vector<LabeledPair> out;
  for (const auto& traj : trajs) {
    for (const auto& tr : traj.transitions) {
      out.push_back({net.project(env.pair_features(tr.state, tr.action)), label});
    }
  }
  return out;
}

// One cross-entropy epoch over the pool; returns the mean loss observed
// before each update (full pool when minibatch == 0).
double cross_entropy_epoch(DiscriminatorNet& net, std::vector<LabeledPair>& pool,
                           int minibatch, nn::AdamState& opt, std::mt19937_64& rng) {
  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  if (minibatch > 0) std::shuffle(order.begin(), order.end(), rng);
  const std::size_t mb = minibatch > 0 ? static_cast<std::size_t>(minibatch) : pool.size();

  nn::MlpGrads grads = nn::zero_grads_like(net.net);
  nn::Tape tape;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t start = 0; start < order.size(); start += mb) {
    const std::size_t end = std::min(order.size(), start + mb);
    grads.zero();
    const double inv = 1.0 / static_cast<double>(end - start);
    for (std::size_t k = start; k < end; ++k) {
      const LabeledPair& pair = pool[order[k]];
      const double p = nn::forward(net.net, pair.features, tape)[0];
      loss_sum += -(pair.label * std::log(p) + (1.0 - pair.label) * std::log(1.0 - p));
      ++loss_count;
      // dLoss/dp for binary cross entropy.
      const double g[1] = {inv * (-(pair.label / p) + (1.0 - pair.label) / (1.0 - p))};
      nn::accumulate_backward(net.net, tape, g, 1.0, grads);
    }
    nn::adam_step_inplace(net.net, grads, opt);
  }
  return loss_sum / static_cast<double>(loss_count);
}

double pool_loss(const DiscriminatorNet& net, const std::vector<LabeledPair>& pool) {
  double loss = 0.0;
  for (const auto& pair : pool) {
    const double p = net.score_features(pair.features);
    loss += -(pair.label * std::log(p) + (1.0 - pair.label) * std::log(1.0 - p));
  }
  return loss / static_cast<double>(pool.size());
}

}  // namespace

BcResult bc_train(const std::vector<Trajectory>& expert_data,
                  const std::vector<Trajectory>& nominal_data, const Env& env,
                  const BcConfig& cfg, std::mt19937_64& rng) {
  auto count_pairs = [](const std::vector<Trajectory>& t) {
    std::size_t n = 0;
    for (const auto& traj : t) n += traj.transitions.size();
    return n;
  };
  if (count_pairs(expert_data) == 0 || count_pairs(nominal_data) == 0) {
    throw ConfigError("bc_train: both expert and nominal pairs are required");
  }

  BcResult result;
  result.net = make_constraint_net(env, cfg.hidden, cfg.input_features, rng);
  std::vector<LabeledPair> pool = pool_pairs(result.net, expert_data, env, 1.0);
  const std::vector<LabeledPair> nominal = pool_pairs(result.net, nominal_data, env, 0.0);
  pool.insert(pool.end(), nominal.begin(), nominal.end());

  nn::AdamState opt = nn::make_adam(result.net.net, cfg.learning_rate);
  for (int e = 0; e < cfg.epochs; ++e) {
    cross_entropy_epoch(result.net, pool, cfg.minibatch_size, opt, rng);
    result.epoch_losses.push_back(pool_loss(result.net, pool));
  }
  return result;
}

double gc_reward(double reward, double zeta_score) {
  return reward + std::log(nn::clamp_unit(zeta_score));
}

GcResult gc_train(const Env& env, const std::vector<Trajectory>& expert_data,
                  const GcConfig& cfg, std::mt19937_64& rng) {
  GcResult result;
  result.discriminator = make_constraint_net(env, cfg.hidden, cfg.input_features, rng);

  PolicyBundle bundle = make_policy_bundle(env.spec(), {64, 64}, {64, 64}, /*lambda=*/0.0,
                                           /*entropy=*/0.0, /*budget=*/0.0, rng);
  result.solver = make_forward_solver(std::move(bundle), cfg.ppo.learning_rate);
  nn::AdamState disc_opt =
      nn::make_adam(result.discriminator.net, cfg.discriminator_learning_rate);

  std::vector<LabeledPair> expert_pool =
      pool_pairs(result.discriminator, expert_data, env, 1.0);

  PpoConfig round_cfg = cfg.ppo;
  round_cfg.rounds = 1;
  round_cfg.lambda_lr = 0.0;  // unconstrained: lambda pinned at 0
  const int horizon = round_cfg.horizon > 0 ? round_cfg.horizon : env.spec().horizon;

  const RewardTransform shaped = [&](double r, std::span<const double> state,
                                     std::span<const double> action) {
    return gc_reward(r, result.discriminator.score_pair(env, state, action));
  };
  const CostFn zero_cost = [](std::span<const double>, std::span<const double>) {
    return 0.0;
  };

  for (int it = 0; it < cfg.outer_iterations; ++it) {
    result.report =
        solve_forward(result.solver, env, zero_cost, EnvMode::nominal, round_cfg, rng, &shaped);

    // One discriminator pass per policy round: expert 1 vs fresh policy 0.
    RolloutBatch batch = collect_rollouts(env, result.solver.bundle, EnvMode::nominal,
                                          round_cfg.steps_per_round, horizon, zero_cost, rng);
    std::vector<LabeledPair> pool = expert_pool;
    for (const auto& ep : batch.episodes) {
      for (const auto& s : ep.steps) {
        pool.push_back(
            {result.discriminator.project(env.pair_features(s.state, s.action)), 0.0});
      }
    }
    for (int e = 0; e < cfg.discriminator_epochs; ++e) {
      cross_entropy_epoch(result.discriminator, pool, cfg.discriminator_minibatch, disc_opt,
                          rng);
    }
  }
  return result;
}

}  // namespace icrl
