#include <doctest.h>

#include <cmath>
#include <random>

#include "icrl/ppo.hpp"
#include "icrl/rng.hpp"
#include "icrl/tabular.hpp"

using namespace icrl;

namespace {

// Single-state bandit: action rewards as given, fixed horizon.
tabular::TabularEnv make_bandit(std::vector<double> rewards, int horizon) {
  tabular::TabularMDP m;
  m.num_states = 1;
  m.num_actions = static_cast<int>(rewards.size());
  m.initial_state = 0;
  m.horizon = horizon;
  m.discount = 1.0;
  m.next_state.assign(rewards.size(), 0);
  m.reward = std::move(rewards);
  return tabular::TabularEnv(std::move(m), "bandit");
}

// Start state branches into two disjoint 2-step corridors with equal reward,
// then both park in a terminal loop.
// States: 0 start; 1,2 path A; 3,4 path B; actions 0/1 pick the branch.
tabular::TabularEnv make_two_path() {
  tabular::TabularMDP m;
  m.num_states = 5;
  m.num_actions = 2;
  m.initial_state = 0;
  m.horizon = 3;
  m.discount = 1.0;
  m.next_state.assign(m.pair_count(), 0);
  m.reward.assign(m.pair_count(), 0.0);
  auto set = [&](int s, int a, int next, double r) {
    m.next_state[m.idx(s, a)] = next;
    m.reward[m.idx(s, a)] = r;
  };
  set(0, 0, 1, 1.0);
  set(0, 1, 3, 1.0);
  set(1, 0, 2, 1.0);
  set(1, 1, 2, 1.0);
  set(3, 0, 4, 1.0);
  set(3, 1, 4, 1.0);
  set(2, 0, 2, 0.0);
  set(2, 1, 2, 0.0);
  set(4, 0, 4, 0.0);
  set(4, 1, 4, 0.0);
  return tabular::TabularEnv(std::move(m), "two_path");
}

PolicyBundle make_test_bundle(const Env& env, std::uint64_t seed, double lambda = 0.0,
                              double entropy = 0.0) {
  std::mt19937_64 rng = make_rng(seed, rng_stream::init_policy);
  return make_policy_bundle(env.spec(), {16, 16}, {16, 16}, lambda, entropy, 0.0, rng);
}

double action0_prob(const PolicyBundle& bundle, const Env& env, std::vector<double> state) {
  const std::vector<double> obs = env.observe(state);
  const std::vector<double> logits = nn::forward_logits(bundle.policy_net, obs);
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return std::exp(logits[0] - mx) / sum;
}

const CostFn kZeroCost = [](std::span<const double>, std::span<const double>) { return 0.0; };

}  // namespace

TEST_CASE("gae: single step with zero values is the reward itself") {
  const std::vector<double> adv = gae(std::vector<double>{2.5}, std::vector<double>{0.0, 0.0},
                                      0.99, 0.95);
  REQUIRE(adv.size() == 1);
  CHECK(adv[0] == 2.5);
}

TEST_CASE("gae: lambda=1, gamma=1, zero values gives the reward-to-go") {
  const std::vector<double> rewards = {1.0, -2.0, 0.5, 3.0};
  const std::vector<double> values(5, 0.0);
  const std::vector<double> adv = gae(rewards, values, 1.0, 1.0);
  double tail = 0.0;
  for (int t = 3; t >= 0; --t) {
    tail += rewards[t];
    CHECK(adv[t] == doctest::Approx(tail).epsilon(1e-14));
  }
}

TEST_CASE("gae: three-step case matches the hand-unrolled recursion") {
  const double gamma = 0.99, lambda = 0.95;
  const std::vector<double> rewards = {1.0, 0.5, 2.0};
  const std::vector<double> values = {0.3, 0.1, -0.2, 0.4};
  const std::vector<double> adv = gae(rewards, values, gamma, lambda);

  const double d2 = 2.0 + gamma * 0.4 - (-0.2);
  const double d1 = 0.5 + gamma * (-0.2) - 0.1;
  const double d0 = 1.0 + gamma * 0.1 - 0.3;
  const double a2 = d2;
  const double a1 = d1 + gamma * lambda * a2;
  const double a0 = d0 + gamma * lambda * a1;
  CHECK(adv[2] == doctest::Approx(a2).epsilon(1e-14));
  CHECK(adv[1] == doctest::Approx(a1).epsilon(1e-14));
  CHECK(adv[0] == doctest::Approx(a0).epsilon(1e-14));
}

TEST_CASE("gae: lambda=0 equals one-step TD residuals exactly") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<double> rewards(12), values(13);
  for (double& r : rewards) r = unif(rng);
  for (double& v : values) v = unif(rng);
  const std::vector<double> adv = gae(rewards, values, 0.97, 0.0);
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    CHECK(adv[t] == rewards[t] + 0.97 * values[t + 1] - values[t]);
  }
}

TEST_CASE("gae rejects mismatched lengths") {
  CHECK_THROWS_AS(gae(std::vector<double>{1.0}, std::vector<double>{0.0}, 0.99, 0.95),
                  DimensionError);
}

TEST_CASE("lagrangian_step examples and projection") {
  CHECK(lagrangian_step(0.7, 0.3, 0.3, 0.1) == 0.7);                 // J^c == budget
  CHECK(lagrangian_step(0.0, -1.0, 0.0, 0.1) == 0.0);                // projection at zero
  CHECK(lagrangian_step(1.0, 0.5, 0.0, 0.1) == doctest::Approx(1.05));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double out = lagrangian_step(std::abs(unif(rng)), unif(rng), unif(rng), 0.3);
    CHECK(out >= 0.0);
  }
}

TEST_CASE("ppo_update: zero advantages on both streams leave the policy unchanged") {
  const tabular::TabularEnv env = make_bandit({1.0, 0.0}, 4);
  ForwardSolver solver = make_forward_solver(make_test_bundle(env, 5), 3e-4);
  std::mt19937_64 rng = make_rng(5, rng_stream::rollouts);
  RolloutBatch batch = collect_rollouts(env, solver.bundle, EnvMode::nominal, 64, 4,
                                        kZeroCost, rng);
  compute_advantages(batch, 0.99, 0.95, 0.99, 0.95);
  for (auto& ep : batch.episodes) {
    for (auto& s : ep.steps) {
      s.reward_advantage = 0.0;
      s.cost_advantage = 0.0;
    }
  }
  const nn::MlpParams before = solver.bundle.policy_net;
  const nn::MlpParams value_before = solver.bundle.reward_value_net;
  PpoConfig cfg;
  cfg.minibatch_size = 16;
  cfg.epochs = 3;
  ppo_update(solver, batch, cfg, rng);
  for (std::size_t l = 0; l < before.weights.size(); ++l) {
    CHECK(solver.bundle.policy_net.weights[l].data == before.weights[l].data);
  }
  // The critics still regress to their returns.
  bool value_moved = false;
  for (std::size_t l = 0; l < value_before.weights.size(); ++l) {
    if (solver.bundle.reward_value_net.weights[l].data != value_before.weights[l].data) {
      value_moved = true;
    }
  }
  CHECK(value_moved);
}

TEST_CASE("ppo_update with lambda=0 ignores the cost stream entirely") {
  const tabular::TabularEnv env = make_bandit({1.0, 0.0}, 4);
  PpoConfig cfg;
  cfg.minibatch_size = 16;
  cfg.epochs = 2;

  auto run_once = [&](bool scramble_costs) {
    ForwardSolver solver = make_forward_solver(make_test_bundle(env, 6, /*lambda=*/0.0), 3e-4);
    std::mt19937_64 rng = make_rng(7, rng_stream::rollouts);
    RolloutBatch batch = collect_rollouts(env, solver.bundle, EnvMode::nominal, 64, 4,
                                          kZeroCost, rng);
    compute_advantages(batch, 0.99, 0.95, 0.99, 0.95);
    if (scramble_costs) {
      double x = 0.1;
      for (auto& ep : batch.episodes) {
        for (auto& s : ep.steps) {
          s.cost_advantage = std::sin(x += 1.3);
          s.cost_return = std::cos(x);
        }
      }
    }
    std::mt19937_64 update_rng = make_rng(8, rng_stream::rollouts);
    ppo_update(solver, batch, cfg, update_rng);
    return solver.bundle.policy_net;
  };

  const nn::MlpParams a = run_once(false);
  const nn::MlpParams b = run_once(true);
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.weights[l].data.size(); ++i) {
      CHECK(a.weights[l].data[i] == doctest::Approx(b.weights[l].data[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("ppo_update: bandit probability of the better arm strictly increases") {
  const tabular::TabularEnv env = make_bandit({1.0, 0.0}, 8);
  ForwardSolver solver = make_forward_solver(make_test_bundle(env, 11), 1e-3);
  std::mt19937_64 rng = make_rng(11, rng_stream::rollouts);
  PpoConfig cfg;
  cfg.minibatch_size = 0x7fffffff;  // full batch: deterministic improvement
  cfg.epochs = 5;
  double prev = action0_prob(solver.bundle, env, {0.0});
  for (int update = 0; update < 10; ++update) {
    RolloutBatch batch = collect_rollouts(env, solver.bundle, EnvMode::nominal, 256, 8,
                                          kZeroCost, rng);
    compute_advantages(batch, 0.99, 0.95, 0.99, 0.95);
    ppo_update(solver, batch, cfg, rng);
    const double now = action0_prob(solver.bundle, env, {0.0});
    CHECK(now > prev);
    prev = now;
  }
  CHECK(prev > 0.55);
}

TEST_CASE("ppo_update is invariant to uniform shifts of the reward advantages") {
  const tabular::TabularEnv env = make_bandit({1.0, 0.2}, 6);
  PpoConfig cfg;
  cfg.minibatch_size = 32;
  cfg.epochs = 2;

  auto run_once = [&](double shift) {
    ForwardSolver solver = make_forward_solver(make_test_bundle(env, 13), 3e-4);
    std::mt19937_64 rng = make_rng(13, rng_stream::rollouts);
    RolloutBatch batch = collect_rollouts(env, solver.bundle, EnvMode::nominal, 96, 6,
                                          kZeroCost, rng);
    compute_advantages(batch, 0.99, 0.95, 0.99, 0.95);
    for (auto& ep : batch.episodes) {
      for (auto& s : ep.steps) s.reward_advantage += shift;
    }
    std::mt19937_64 update_rng = make_rng(14, rng_stream::rollouts);
    ppo_update(solver, batch, cfg, update_rng);
    return solver.bundle.policy_net;
  };

  const nn::MlpParams base = run_once(0.0);
  const nn::MlpParams shifted = run_once(7.5);
  double worst = 0.0;
  for (std::size_t l = 0; l < base.weights.size(); ++l) {
    for (std::size_t i = 0; i < base.weights[l].data.size(); ++i) {
      worst = std::max(worst, std::abs(base.weights[l].data[i] - shifted.weights[l].data[i]));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("ppo_update aborts on non-finite advantages with the bundle unchanged") {
  const tabular::TabularEnv env = make_bandit({1.0, 0.0}, 4);
  ForwardSolver solver = make_forward_solver(make_test_bundle(env, 17), 3e-4);
  std::mt19937_64 rng = make_rng(17, rng_stream::rollouts);
  RolloutBatch batch = collect_rollouts(env, solver.bundle, EnvMode::nominal, 32, 4,
                                        kZeroCost, rng);
  compute_advantages(batch, 0.99, 0.95, 0.99, 0.95);
  batch.episodes[0].steps[0].reward_advantage = std::numeric_limits<double>::quiet_NaN();
  const nn::MlpParams before = solver.bundle.policy_net;
  PpoConfig cfg;
  cfg.minibatch_size = 0x7fffffff;
  CHECK_THROWS_AS(ppo_update(solver, batch, cfg, rng), NumericalError);
  for (std::size_t l = 0; l < before.weights.size(); ++l) {
    CHECK(solver.bundle.policy_net.weights[l].data == before.weights[l].data);
  }
}

TEST_CASE("solve_forward with cost-free constraint reduces to plain PPO on the bandit") {
  const tabular::TabularEnv env = make_bandit({1.0, 0.0}, 8);
  ForwardSolver solver = make_forward_solver(make_test_bundle(env, 19), 1e-3);
  std::mt19937_64 rng = make_rng(19, rng_stream::rollouts);
  PpoConfig cfg;
  cfg.steps_per_round = 512;
  cfg.rounds = 30;
  cfg.minibatch_size = 64;
  const SolveReport report = solve_forward(solver, env, kZeroCost, EnvMode::nominal, cfg, rng);
  CHECK(report.converged);  // zero cost satisfies the budget trivially
  CHECK(action0_prob(solver.bundle, env, {0.0}) > 0.9);
}

TEST_CASE("solve_forward steers all probability off a costed path") {
  const tabular::TabularEnv env = make_two_path();
  ForwardSolver solver = make_forward_solver(make_test_bundle(env, 23, /*lambda=*/1.0), 1e-3);
  std::mt19937_64 rng = make_rng(23, rng_stream::rollouts);
  // Path B (branch action 1 and its corridor) carries cost 1.
  const CostFn cost = [](std::span<const double> state, std::span<const double> action) {
    const int s = static_cast<int>(state[0]);
    const int a = static_cast<int>(action[0]);
    if (s == 0 && a == 1) return 1.0;
    if (s == 3 || s == 4) return 1.0;
    return 0.0;
  };
  PpoConfig cfg;
  cfg.steps_per_round = 600;
  cfg.rounds = 40;
  cfg.minibatch_size = 64;
  cfg.lambda_lr = 0.1;
  const SolveReport report = solve_forward(solver, env, cost, EnvMode::nominal, cfg, rng);
  CHECK(report.converged);
  // Exact enumeration oracle: the costly branch's probability is the policy
  // probability of action 1 at the start state.
  const double p_costly = 1.0 - action0_prob(solver.bundle, env, {0.0});
  CHECK(p_costly < 0.01);
}

TEST_CASE("entropy-regularized bandit converges to the Boltzmann weights") {
  // With entropy coefficient c, the optimum of E[r] + c H is softmax(r / c);
  // c = 0.5 doubles the logits.
  const tabular::TabularEnv env = make_bandit({1.0, 0.5}, 1);
  ForwardSolver solver =
      make_forward_solver(make_test_bundle(env, 29, 0.0, /*entropy=*/0.5), 1e-3);
  std::mt19937_64 rng = make_rng(29, rng_stream::rollouts);
  PpoConfig cfg;
  cfg.steps_per_round = 256;
  cfg.rounds = 120;
  cfg.minibatch_size = 64;
  cfg.reward_gae_gamma = 1.0;
  cfg.normalize_advantages = false;  // the temperature needs the raw scale
  solve_forward(solver, env, kZeroCost, EnvMode::nominal, cfg, rng);
  const double expected = std::exp(2.0 * 1.0) / (std::exp(2.0 * 1.0) + std::exp(2.0 * 0.5));
  CHECK(action0_prob(solver.bundle, env, {0.0}) == doctest::Approx(expected).epsilon(0.08));
}

TEST_CASE("solve_forward flags non-convergence under an unsatisfiable budget") {
  const tabular::TabularEnv env = make_bandit({1.0, 0.0}, 4);
  ForwardSolver solver = make_forward_solver(make_test_bundle(env, 31, /*lambda=*/1.0), 3e-4);
  std::mt19937_64 rng = make_rng(31, rng_stream::rollouts);
  const CostFn all_cost = [](std::span<const double>, std::span<const double>) { return 1.0; };
  PpoConfig cfg;
  cfg.steps_per_round = 128;
  cfg.rounds = 4;
  const SolveReport report = solve_forward(solver, env, all_cost, EnvMode::nominal, cfg, rng);
  CHECK_FALSE(report.converged);
  CHECK(report.final_cost > 0.5);
  CHECK(report.rounds_run == 4);
}
