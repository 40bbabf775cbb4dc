#include <doctest.h>

#include <cmath>
#include <random>

#include "icrl/constraint.hpp"
#include "icrl/rng.hpp"
#include "icrl/tabular.hpp"

using namespace icrl;
using tabular::EnumeratedTrajectory;
using tabular::TabularMDP;

namespace {

TabularMDP make_ring(int n, int horizon, double discount = 1.0) {
  TabularMDP m;
  m.num_states = n;
  m.num_actions = 2;
  m.initial_state = 0;
  m.horizon = horizon;
  m.discount = discount;
  m.next_state.resize(m.pair_count());
  m.reward.resize(m.pair_count());
  for (int s = 0; s < n; ++s) {
    const int cw = (s + 1) % n;
    const int ccw = (s + n - 1) % n;
    m.next_state[m.idx(s, 0)] = cw;
    m.next_state[m.idx(s, 1)] = ccw;
    m.reward[m.idx(s, 0)] = (cw == 0) ? 1.0 : 0.0;
    m.reward[m.idx(s, 1)] = (ccw == 0) ? 1.0 : 0.0;
  }
  return m;
}

Trajectory to_trajectory(const TabularMDP& m, const EnumeratedTrajectory& t) {
  Trajectory traj;
  for (std::size_t k = 0; k < t.actions.size(); ++k) {
    Transition tr;
    tr.state = {static_cast<double>(t.states[k])};
    tr.action = {static_cast<double>(t.actions[k])};
    tr.next_state = {static_cast<double>(t.states[k + 1])};
    tr.reward = m.reward[m.idx(t.states[k], t.actions[k])];
    tr.done = (k + 1 == t.actions.size());
    traj.transitions.push_back(std::move(tr));
  }
  return traj;
}

// A constraint net whose logits are an explicit per-pair table: single
// sigmoid layer over the one-hot pair features of a TabularEnv.
ConstraintNet tabular_constraint_net(const Env& env, std::mt19937_64& rng) {
  return make_constraint_net(env, /*hidden=*/{}, /*input_features=*/{}, rng);
}

double pair_score(const ConstraintNet& net, const Env& env, int s, int a) {
  return net.score_pair(env, std::vector<double>{static_cast<double>(s)},
                        std::vector<double>{static_cast<double>(a)});
}

// Exact MaxEnt log likelihood of the expert set under the net-induced
// feasibility, via full trajectory enumeration (Z as a plain sum).
double enumerated_log_likelihood(const ConstraintNet& net, const Env& env, const TabularMDP& m,
                                 const std::vector<EnumeratedTrajectory>& all,
                                 const std::vector<EnumeratedTrajectory>& expert, double beta) {
  auto log_zeta = [&](const EnumeratedTrajectory& t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < t.actions.size(); ++k) {
      acc += std::log(pair_score(net, env, t.states[k], t.actions[k]));
    }
    return acc;
  };
  double z = 0.0;
  for (const auto& t : all) z += std::exp(beta * t.discounted_reward + log_zeta(t));
  double ll = 0.0;
  for (const auto& t : expert) ll += beta * t.discounted_reward + log_zeta(t);
  return ll / static_cast<double>(expert.size()) - std::log(z);
}

}  // namespace

TEST_CASE("traj_score multiplies per-step scores in log space") {
  const tabular::TabularEnv env(make_ring(2, 3), "ring2");
  std::mt19937_64 rng = make_rng(1, 0);
  ConstraintNet net = tabular_constraint_net(env, rng);

  // Zero parameters: every score is exactly 0.5, so three steps give 1/8.
  for (auto& w : net.net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : net.net.biases) std::fill(b.begin(), b.end(), 0.0);
  const auto trajs = tabular::enumerate_trajectories(make_ring(2, 3));
  const Trajectory traj = to_trajectory(make_ring(2, 3), trajs[0]);
  CHECK(traj_score(net, traj, env) == doctest::Approx(0.125).epsilon(1e-12));

  // Saturated-high net: product sits at the clamp ceiling, log close to 0.
  net.net.biases[0][0] = 50.0;
  CHECK(std::log(traj_score(net, traj, env)) ==
        doctest::Approx(3.0 * std::log(1.0 - nn::kClamp)).epsilon(1e-9));

  // Any step at the clamp floor caps the product at 1e-6.
  net.net.biases[0][0] = -50.0;
  CHECK(std::log(traj_score(net, traj, env)) <= std::log(1e-6));
}

TEST_CASE("traj_score log-space evaluation matches the direct product") {
  const TabularMDP m = make_ring(3, 20);
  const tabular::TabularEnv env(m, "ring3");
  std::mt19937_64 rng = make_rng(2, 0);
  const ConstraintNet net = tabular_constraint_net(env, rng);
  std::mt19937_64 action_rng(7);
  Trajectory traj;
  int s = 0;
  for (int t = 0; t < 20; ++t) {
    const int a = static_cast<int>(action_rng() % 2);
    Transition tr;
    tr.state = {static_cast<double>(s)};
    tr.action = {static_cast<double>(a)};
    s = m.next_state[m.idx(s, a)];
    tr.next_state = {static_cast<double>(s)};
    traj.transitions.push_back(tr);
  }
  double direct = 1.0;
  for (const auto& tr : traj.transitions) direct *= net.score_pair(env, tr.state, tr.action);
  const double via_logs = traj_score(net, traj, env);
  CHECK(std::abs(via_logs - direct) / direct < 1e-10);
}

TEST_CASE("importance weights: theta equal to theta_bar gives exactly 1") {
  const TabularMDP m = make_ring(3, 5);
  const tabular::TabularEnv env(m, "ring3");
  std::mt19937_64 rng = make_rng(3, 0);
  const ConstraintNet net = tabular_constraint_net(env, rng);
  const auto trajs = tabular::enumerate_trajectories(m, 100000);
  const Trajectory traj = to_trajectory(m, trajs[11]);
  const TrajectoryWeights w = importance_weights(net, net, traj, env);
  for (double v : w.per_step) CHECK(v == 1.0);
  CHECK(w.total == 1.0);
  CHECK(w.log_total == 0.0);
}

TEST_CASE("importance weights: hand-built score ratios") {
  // Current scores (0.9, 0.8) against stale (0.45, 0.4) on a two-step
  // trajectory: per-step weights (2, 2), trajectory weight 4.
  const TabularMDP m = make_ring(2, 2);
  const tabular::TabularEnv env(m, "ring2");
  std::mt19937_64 rng = make_rng(4, 0);
  ConstraintNet current = tabular_constraint_net(env, rng);
  ConstraintNet stale = current;
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  auto set_scores = [&](ConstraintNet& net, double s0a0, double s1a0) {
    for (auto& w : net.net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    std::fill(net.net.biases[0].begin(), net.net.biases[0].end(), 0.0);
    // Feature layout: one-hot states then one-hot actions.
    net.net.weights[0](0, 0) = logit(s0a0);
    net.net.weights[0](0, 1) = logit(s1a0);
  };
  set_scores(current, 0.9, 0.8);
  set_scores(stale, 0.45, 0.4);

  Trajectory traj;
  Transition t0;
  t0.state = {0.0};
  t0.action = {0.0};
  t0.next_state = {1.0};
  Transition t1;
  t1.state = {1.0};
  t1.action = {0.0};
  t1.next_state = {0.0};
  traj.transitions = {t0, t1};

  const TrajectoryWeights w = importance_weights(current, stale, traj, env);
  REQUIRE(w.per_step.size() == 2);
  CHECK(w.per_step[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(w.per_step[1] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(w.total == doctest::Approx(4.0).epsilon(1e-9));

  // Single-step trajectory: the trajectory weight is that step's weight.
  Trajectory single;
  single.transitions = {t0};
  const TrajectoryWeights w1 = importance_weights(current, stale, single, env);
  CHECK(w1.total == doctest::Approx(w1.per_step[0]).epsilon(1e-12));

  // Each per-step weight depends only on its own (s, a): the same pair
  // embedded in a different trajectory keeps the same weight.
  Trajectory reordered;
  reordered.transitions = {t1, t0};
  const TrajectoryWeights w2 = importance_weights(current, stale, reordered, env);
  CHECK(w2.per_step[1] == w.per_step[0]);
  CHECK(w2.per_step[0] == w.per_step[1]);
}

TEST_CASE("kl_bounds: unit weights give exactly (0, 0)") {
  const std::vector<double> ones(5, 1.0);
  const KlBounds b = kl_bounds(ones);
  CHECK(b.forward_bound == 0.0);
  CHECK(b.reverse_bound == 0.0);
}

TEST_CASE("kl_bounds: constant weights e give forward 2 and reverse 0") {
  const std::vector<double> ws(4, std::exp(1.0));
  const KlBounds b = kl_bounds(ws);
  CHECK(b.forward_bound == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(b.reverse_bound == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kl_bounds: hand-evaluated two-sample case") {
  const std::vector<double> ws = {2.0, 0.5};
  const double mean = 1.25;
  const KlBounds b = kl_bounds(ws);
  CHECK(b.forward_bound == doctest::Approx(2.0 * std::log(mean)).epsilon(1e-12));
  const double expected_reverse =
      ((2.0 - mean) * std::log(2.0) + (0.5 - mean) * std::log(0.5)) / 2.0 / mean;
  CHECK(b.reverse_bound == doctest::Approx(expected_reverse).epsilon(1e-12));
}

TEST_CASE("kl_bounds guards its inputs") {
  CHECK_THROWS_AS(kl_bounds(std::vector<double>{}), ConfigError);
  CHECK_THROWS_AS(kl_bounds(std::vector<double>{1.0, -0.5}), NumericalError);
  CHECK_THROWS_AS(kl_bounds(std::vector<double>{1.0, 0.0}), NumericalError);
}

TEST_CASE("kl_bounds log-space path agrees with the plain path") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  std::vector<double> ws(40), logs(40);
  for (int i = 0; i < 40; ++i) {
    logs[i] = unif(rng);
    ws[i] = std::exp(logs[i]);
  }
  const KlBounds a = kl_bounds(ws);
  const KlBounds b = kl_bounds_log(logs);
  CHECK(a.forward_bound == doctest::Approx(b.forward_bound).epsilon(1e-12));
  CHECK(a.reverse_bound == doctest::Approx(b.reverse_bound).epsilon(1e-12));
}

TEST_CASE("grad_step: identical batches with unit weights and delta=0 cancel exactly") {
  const TabularMDP m = make_ring(3, 6);
  const tabular::TabularEnv env(m, "ring3");
  std::mt19937_64 rng = make_rng(5, 0);
  const ConstraintNet net = tabular_constraint_net(env, rng);
  const auto all = tabular::enumerate_trajectories(m, 100000);
  std::vector<Trajectory> batch;
  for (int i : {0, 5, 17}) batch.push_back(to_trajectory(m, all[i]));
  std::vector<std::vector<double>> unit(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    unit[i].assign(batch[i].transitions.size(), 1.0);
  }
  const nn::MlpGrads g = grad_step(net, batch, batch, unit, env, /*delta=*/0.0);
  CHECK(g.squared_norm() < 1e-24);
}

TEST_CASE("grad_step: a lone expert pair is pushed upward") {
  const TabularMDP m = make_ring(2, 1);
  const tabular::TabularEnv env(m, "ring2");
  std::mt19937_64 rng = make_rng(6, 0);
  ConstraintNet net = tabular_constraint_net(env, rng);
  for (auto& w : net.net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  std::fill(net.net.biases[0].begin(), net.net.biases[0].end(), 0.0);

  Trajectory traj;
  Transition tr;
  tr.state = {0.0};
  tr.action = {0.0};
  tr.next_state = {1.0};
  traj.transitions = {tr};
  const double before = pair_score(net, env, 0, 0);
  CHECK(before == doctest::Approx(0.5));

  const nn::MlpGrads direction = grad_step(net, {traj}, {}, {}, env, 0.0);
  // Ascend a little along the returned direction.
  for (std::size_t l = 0; l < net.net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net.net.weights[l].data.size(); ++i) {
      net.net.weights[l].data[i] += 0.05 * direction.weights[l].data[i];
    }
    for (std::size_t i = 0; i < net.net.biases[l].size(); ++i) {
      net.net.biases[l][i] += 0.05 * direction.biases[l][i];
    }
  }
  CHECK(pair_score(net, env, 0, 0) > before);
}

TEST_CASE("grad_step rejects non-finite importance weights") {
  const TabularMDP m = make_ring(2, 2);
  const tabular::TabularEnv env(m, "ring2");
  std::mt19937_64 rng = make_rng(7, 0);
  const ConstraintNet net = tabular_constraint_net(env, rng);
  const auto all = tabular::enumerate_trajectories(m, 1000);
  const std::vector<Trajectory> batch = {to_trajectory(m, all[0])};
  std::vector<std::vector<double>> weights = {{1.0, std::numeric_limits<double>::infinity()}};
  CHECK_THROWS_AS(grad_step(net, batch, batch, weights, env, 0.0), NumericalError);
}

TEST_CASE("grad_step matches finite differences of the enumerated log likelihood") {
  const TabularMDP m = make_ring(2, 3, 0.9);
  const tabular::TabularEnv env(m, "ring2");
  const double beta = 0.8;
  std::mt19937_64 rng = make_rng(8, 0);
  ConstraintNet net = tabular_constraint_net(env, rng);

  const auto all = tabular::enumerate_trajectories(m, 1000);
  std::vector<EnumeratedTrajectory> expert_enum = {all[0], all[3]};
  std::vector<Trajectory> expert;
  for (const auto& t : expert_enum) expert.push_back(to_trajectory(m, t));

  // Nominal side: the full enumeration, weighted by M * P_theta(tau) so that
  // the sample average becomes the exact expectation under the MaxEnt
  // distribution induced by the current net.
  std::vector<Trajectory> nominal;
  for (const auto& t : all) nominal.push_back(to_trajectory(m, t));

  auto model_probs = [&]() {
    std::vector<double> w(all.size());
    double z = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      double log_zeta = 0.0;
      for (std::size_t k = 0; k < all[i].actions.size(); ++k) {
        log_zeta += std::log(pair_score(net, env, all[i].states[k], all[i].actions[k]));
      }
      w[i] = std::exp(beta * all[i].discounted_reward + log_zeta);
      z += w[i];
    }
    for (double& v : w) v /= z;
    return w;
  };

  const std::vector<double> probs = model_probs();
  std::vector<std::vector<double>> weights(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    weights[i].assign(all[i].actions.size(),
                      probs[i] * static_cast<double>(all.size()));
  }

  const nn::MlpGrads analytic = grad_step(net, expert, nominal, weights, env, 0.0);

  // Central finite differences of the exact likelihood.
  const double h = 1e-5;
  double worst = 0.0;
  auto check_param = [&](double& p, double a) {
    const double saved = p;
    p = saved + h;
    const double up = enumerated_log_likelihood(net, env, m, all, expert_enum, beta);
    p = saved - h;
    const double down = enumerated_log_likelihood(net, env, m, all, expert_enum, beta);
    p = saved;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
  };
  for (std::size_t l = 0; l < net.net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net.net.weights[l].data.size(); ++i) {
      check_param(net.net.weights[l].data[i], analytic.weights[l].data[i]);
    }
    for (std::size_t i = 0; i < net.net.biases[l].size(); ++i) {
      check_param(net.net.biases[l][i], analytic.biases[l][i]);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("exact KLs stay below the importance-weight bounds on looser nets") {
  // Pairs with zeta_theta >= zeta_theta_bar pointwise: here both paper
  // bounds are provable, and the reverse gap equals the forward KL exactly.
  const TabularMDP m = make_ring(3, 4);
  const double beta = 0.9;
  const auto trajs = tabular::enumerate_trajectories(m, 1000);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> stale(m.pair_count()), current(m.pair_count());
    for (std::size_t i = 0; i < stale.size(); ++i) {
      stale[i] = 0.1 + 0.8 * unif(rng);
      current[i] = stale[i] + (1.0 - stale[i]) * 0.9 * unif(rng);
    }
    const auto sol_stale = tabular::soft_solve(m, beta, stale);
    const auto sol_current = tabular::soft_solve(m, beta, current);
    const auto p = tabular::trajectory_distribution(m, sol_stale, trajs);
    const auto q = tabular::trajectory_distribution(m, sol_current, trajs);
    const auto [kl_fwd, kl_rev] = tabular::exact_kl(p, q);

    double mean_w = 0.0, mean_log_w = 0.0, mean_w_log_w = 0.0;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      const double w = tabular::trajectory_score(m, current, trajs[i]) /
                       tabular::trajectory_score(m, stale, trajs[i]);
      mean_w += p[i] * w;
      mean_log_w += p[i] * std::log(w);
      mean_w_log_w += p[i] * w * std::log(w);
    }
    const double forward_bound = 2.0 * std::log(mean_w);
    const double reverse_bound = (mean_w_log_w - mean_w * mean_log_w) / mean_w;

    CHECK(kl_fwd <= forward_bound + 1e-12);
    CHECK(kl_rev <= reverse_bound + 1e-12);
    // Exact identities behind the bounds.
    CHECK(kl_fwd == doctest::Approx(std::log(mean_w) - mean_log_w).epsilon(1e-9));
    CHECK(reverse_bound - kl_rev == doctest::Approx(kl_fwd).epsilon(1e-9));
  }
}

TEST_CASE("backward_phase: B=0 leaves the net untouched") {
  const TabularMDP m = make_ring(3, 4);
  const tabular::TabularEnv env(m, "ring3");
  std::mt19937_64 rng = make_rng(9, 0);
  ConstraintNet net = tabular_constraint_net(env, rng);
  const nn::MlpParams before = net.net;
  nn::AdamState opt = nn::make_adam(net.net, 0.01);
  BackwardConfig cfg;
  cfg.iterations = 0;
  const auto all = tabular::enumerate_trajectories(m, 1000);
  std::vector<Trajectory> batch = {to_trajectory(m, all[0])};
  std::mt19937_64 phase_rng = make_rng(9, 1);
  const PhaseReport report = backward_phase(net, batch, batch, env, cfg, opt, phase_rng);
  CHECK(report.iterations_run == 0);
  for (std::size_t l = 0; l < before.weights.size(); ++l) {
    CHECK(net.net.weights[l].data == before.weights[l].data);
  }
}

TEST_CASE("backward_phase: zero thresholds stop after the first post-update check") {
  const TabularMDP m = make_ring(3, 4);
  const tabular::TabularEnv env(m, "ring3");
  std::mt19937_64 rng = make_rng(10, 0);
  ConstraintNet net = tabular_constraint_net(env, rng);
  nn::AdamState opt = nn::make_adam(net.net, 0.01);
  BackwardConfig cfg;
  cfg.iterations = 10;
  cfg.max_forward_kl = 0.0;
  cfg.max_reverse_kl = 0.0;
  const auto all = tabular::enumerate_trajectories(m, 1000);
  std::vector<Trajectory> expert = {to_trajectory(m, all[0])};
  std::vector<Trajectory> nominal = {to_trajectory(m, all[7]), to_trajectory(m, all[9])};
  std::mt19937_64 phase_rng = make_rng(10, 1);
  const PhaseReport report = backward_phase(net, expert, nominal, env, cfg, opt, phase_rng);
  CHECK(report.iterations_run == 1);
  CHECK(report.early_stopped);
}

TEST_CASE("backward_phase: generous thresholds run all B iterations") {
  const TabularMDP m = make_ring(3, 4);
  const tabular::TabularEnv env(m, "ring3");
  std::mt19937_64 rng = make_rng(11, 0);
  ConstraintNet net = tabular_constraint_net(env, rng);
  nn::AdamState opt = nn::make_adam(net.net, 0.001);  // small steps: bounds stay tiny
  BackwardConfig cfg;
  cfg.iterations = 10;
  cfg.max_forward_kl = 10.0;
  cfg.max_reverse_kl = 2.5;
  const auto all = tabular::enumerate_trajectories(m, 1000);
  std::vector<Trajectory> expert = {to_trajectory(m, all[0])};
  std::vector<Trajectory> nominal = {to_trajectory(m, all[7]), to_trajectory(m, all[9])};
  std::mt19937_64 phase_rng = make_rng(11, 1);
  const PhaseReport report = backward_phase(net, expert, nominal, env, cfg, opt, phase_rng);
  CHECK(report.iterations_run == 10);
  CHECK_FALSE(report.early_stopped);
  CHECK(report.final_bounds.reverse_bound < 2.5);
}

TEST_CASE("backward_phase with unit weights reproduces the plain estimator step") {
  const TabularMDP m = make_ring(3, 5);
  const tabular::TabularEnv env(m, "ring3");
  std::mt19937_64 rng = make_rng(12, 0);
  const ConstraintNet reference = tabular_constraint_net(env, rng);
  const auto all = tabular::enumerate_trajectories(m, 100000);
  std::vector<Trajectory> expert, nominal;
  for (int i : {0, 9}) expert.push_back(to_trajectory(m, all[i]));
  for (int i : {3, 12, 30}) nominal.push_back(to_trajectory(m, all[i]));

  // Route A: backward_phase with importance sampling disabled, one full-batch
  // iteration.
  ConstraintNet net_a = reference;
  nn::AdamState opt_a = nn::make_adam(net_a.net, 0.01);
  BackwardConfig cfg;
  cfg.iterations = 1;
  cfg.minibatch_size = 0;  // full batch
  cfg.use_importance_sampling = false;
  cfg.regularizer_weight = 0.5;
  std::mt19937_64 phase_rng = make_rng(12, 1);
  backward_phase(net_a, expert, nominal, env, cfg, opt_a, phase_rng);

  // Route B: explicit unit-weight gradient, one adam step.
  ConstraintNet net_b = reference;
  nn::AdamState opt_b = nn::make_adam(net_b.net, 0.01);
  std::vector<std::vector<double>> unit(nominal.size());
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    unit[i].assign(nominal[i].transitions.size(), 1.0);
  }
  nn::MlpGrads direction = grad_step(net_b, expert, nominal, unit, env, 0.5);
  direction.scale(-1.0);
  nn::adam_step_inplace(net_b.net, direction, opt_b);

  for (std::size_t l = 0; l < net_a.net.weights.size(); ++l) {
    for (std::size_t i = 0; i < net_a.net.weights[l].data.size(); ++i) {
      CHECK(std::abs(net_a.net.weights[l].data[i] - net_b.net.weights[l].data[i]) < 1e-12);
    }
    for (std::size_t i = 0; i < net_a.net.biases[l].size(); ++i) {
      CHECK(std::abs(net_a.net.biases[l][i] - net_b.net.biases[l][i]) < 1e-12);
    }
  }
}

TEST_CASE("sparsity regularizer keeps expert-supported pairs above threshold") {
  // Both corridors of a two-branch world are expert-used; with delta = 0.5
  // every visited pair ends above 0.5, while delta = 0 leaves the scores at
  // their initialization.
  TabularMDP m;
  m.num_states = 5;
  m.num_actions = 2;
  m.initial_state = 0;
  m.horizon = 3;
  m.next_state.assign(m.pair_count(), 0);
  m.reward.assign(m.pair_count(), 0.0);
  auto set = [&](int s, int a, int next) { m.next_state[m.idx(s, a)] = next; };
  set(0, 0, 1);
  set(0, 1, 3);
  set(1, 0, 2);
  set(1, 1, 2);
  set(3, 0, 4);
  set(3, 1, 4);
  set(2, 0, 2);
  set(2, 1, 2);
  set(4, 0, 4);
  set(4, 1, 4);
  const tabular::TabularEnv env(m, "two_branch");

  auto run_phase = [&](double delta) {
    std::mt19937_64 rng = make_rng(13, 0);
    ConstraintNet net = tabular_constraint_net(env, rng);
    nn::AdamState opt = nn::make_adam(net.net, 0.05);
    const auto all = tabular::enumerate_trajectories(m, 1000);
    std::vector<Trajectory> expert = {to_trajectory(m, all[0]),
                                      to_trajectory(m, all[4])};  // both branches
    BackwardConfig cfg;
    cfg.iterations = 40;
    cfg.minibatch_size = 0;
    cfg.regularizer_weight = delta;
    cfg.use_early_stopping = false;
    std::mt19937_64 phase_rng = make_rng(13, 1);
    backward_phase(net, expert, expert, env, cfg, opt, phase_rng);
    double min_score = 1.0;
    for (const auto& traj : expert) {
      for (const auto& tr : traj.transitions) {
        min_score = std::min(min_score, net.score_pair(env, tr.state, tr.action));
      }
    }
    return min_score;
  };

  const double with_reg = run_phase(0.5);
  const double without_reg = run_phase(0.0);
  CHECK(with_reg > 0.5);
  CHECK(with_reg > without_reg);
}

TEST_CASE("constraint net checkpoints carry the feature declaration") {
  const auto env = make_env("pointmass");
  std::mt19937_64 rng = make_rng(14, 0);
  const ConstraintNet net = make_constraint_net(*env, {8}, {0, 1}, rng);
  const ConstraintNet back = constraint_net_from_json(constraint_net_to_json(net));
  CHECK(back.input_features == std::vector<int>{0, 1});
  CHECK(back.feature_names == std::vector<std::string>{"x/10", "y/10"});
  for (std::size_t l = 0; l < net.net.weights.size(); ++l) {
    CHECK(back.net.weights[l].data == net.net.weights[l].data);
  }
}
