#include "icrl/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "icrl/checkpoint.hpp"
#include "icrl/dataset.hpp"
#include "icrl/rng.hpp"

namespace icrl {

using nlohmann::json;

RunConfig default_config(const std::string& env_name) {
  RunConfig cfg;
  cfg.env = env_name;
  cfg.forward.minibatch_size = 64;
  cfg.forward.target_kl = 0.01;
  cfg.forward.learning_rate = 3e-4;
  cfg.forward.reward_gae_gamma = 0.99;
  cfg.forward.reward_gae_lambda = 0.95;
  cfg.forward.cost_gae_gamma = 0.99;
  cfg.forward.cost_gae_lambda = 0.95;
  cfg.forward.lambda_lr = 0.1;
  cfg.lambda_init = 1.0;
  cfg.budget = 0.0;
  cfg.entropy_coeff = 0.0;
  cfg.backward.iterations = 10;
  cfg.backward.regularizer_weight = 0.5;
  cfg.backward.max_forward_kl = 10.0;
  cfg.backward.max_reverse_kl = 2.5;
  cfg.backward.learning_rate = 0.01;
  cfg.backward.minibatch_size = 64;

  if (env_name == "lapgridworld") {
    cfg.expert_rollouts = 1;
    cfg.outer_iterations = 8;
    cfg.forward.rounds = 12;
    cfg.forward.steps_per_round = 2000;
    cfg.expert_solver_rounds = 60;
    cfg.nominal_rollouts = 20;
    cfg.constraint_hidden = {20};
  } else if (env_name == "bridgesgridworld") {
    cfg.expert_rollouts = 10;
    cfg.outer_iterations = 8;
    cfg.forward.rounds = 40;
    cfg.forward.steps_per_round = 2000;
    cfg.expert_solver_rounds = 40;
    cfg.nominal_rollouts = 30;
    cfg.constraint_hidden = {20};
    cfg.entropy_coeff = 0.02;  // keeps all four moves explored on the maze
  } else if (env_name == "pointmass" || env_name == "pointmassbroken" ||
             env_name == "pointcircle" || env_name == "pointcircle-literal") {
    cfg.expert_rollouts = 10;
    cfg.outer_iterations = 6;
    cfg.forward.rounds = 15;
    cfg.forward.steps_per_round = 3000;
    cfg.nominal_rollouts = 20;
    cfg.constraint_hidden = {40, 40};
    cfg.constraint_features = {0, 1};  // position coordinates only (transferable)
  }
  return cfg;
}

namespace {

json ppo_config_to_json(const PpoConfig& c) {
  return json{{"steps_per_round", c.steps_per_round},
              {"rounds", c.rounds},
              {"minibatch_size", c.minibatch_size},
              {"epochs", c.epochs},
              {"clip", c.clip},
              {"target_kl", c.target_kl},
              {"learning_rate", c.learning_rate},
              {"reward_gae_gamma", c.reward_gae_gamma},
              {"reward_gae_lambda", c.reward_gae_lambda},
              {"cost_gae_gamma", c.cost_gae_gamma},
              {"cost_gae_lambda", c.cost_gae_lambda},
              {"lambda_lr", c.lambda_lr},
              {"normalize_advantages", c.normalize_advantages},
              {"cost_tolerance", c.cost_tolerance},
              {"convergence_window", c.convergence_window}};
}

void ppo_config_from_json(const json& j, PpoConfig& c) {
  c.steps_per_round = j.value("steps_per_round", c.steps_per_round);
  c.rounds = j.value("rounds", c.rounds);
  c.minibatch_size = j.value("minibatch_size", c.minibatch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.clip = j.value("clip", c.clip);
  c.target_kl = j.value("target_kl", c.target_kl);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.reward_gae_gamma = j.value("reward_gae_gamma", c.reward_gae_gamma);
  c.reward_gae_lambda = j.value("reward_gae_lambda", c.reward_gae_lambda);
  c.cost_gae_gamma = j.value("cost_gae_gamma", c.cost_gae_gamma);
  c.cost_gae_lambda = j.value("cost_gae_lambda", c.cost_gae_lambda);
  c.lambda_lr = j.value("lambda_lr", c.lambda_lr);
  c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
  c.cost_tolerance = j.value("cost_tolerance", c.cost_tolerance);
  c.convergence_window = j.value("convergence_window", c.convergence_window);
}

json backward_config_to_json(const BackwardConfig& c) {
  return json{{"iterations", c.iterations},
              {"regularizer_weight", c.regularizer_weight},
              {"max_forward_kl", c.max_forward_kl},
              {"max_reverse_kl", c.max_reverse_kl},
              {"learning_rate", c.learning_rate},
              {"minibatch_size", c.minibatch_size},
              {"per_step_regularizer", c.per_step_regularizer},
              {"weight_clip_low", c.weight_clip_low},
              {"weight_clip_high", c.weight_clip_high}};
}

void backward_config_from_json(const json& j, BackwardConfig& c) {
  c.iterations = j.value("iterations", c.iterations);
  c.regularizer_weight = j.value("regularizer_weight", c.regularizer_weight);
  c.max_forward_kl = j.value("max_forward_kl", c.max_forward_kl);
  c.max_reverse_kl = j.value("max_reverse_kl", c.max_reverse_kl);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.minibatch_size = j.value("minibatch_size", c.minibatch_size);
  c.per_step_regularizer = j.value("per_step_regularizer", c.per_step_regularizer);
  c.weight_clip_low = j.value("weight_clip_low", c.weight_clip_low);
  c.weight_clip_high = j.value("weight_clip_high", c.weight_clip_high);
}

void validate_config(const RunConfig& cfg) {
  if (cfg.method != "icrl" && cfg.method != "bc" && cfg.method != "gc" &&
      cfg.method != "nominal") {
    throw ConfigError("unknown method: " + cfg.method);
  }
  if (cfg.outer_iterations < 0) throw ConfigError("outer_iterations must be >= 0");
  if (cfg.expert_rollouts <= 0) throw ConfigError("expert_rollouts must be positive");
  if (cfg.backward.regularizer_weight < 0.0 || cfg.backward.regularizer_weight >= 1.0) {
    throw ConfigError("regularizer weight must lie in [0, 1)");
  }
  if (cfg.backward.iterations < 0) throw ConfigError("backward iterations must be >= 0");
  if (cfg.backward.max_forward_kl <= 0.0 || cfg.backward.max_reverse_kl <= 0.0) {
    throw ConfigError("KL thresholds must be positive");
  }
}

}  // namespace

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "run_config";
  j["env"] = cfg.env;
  j["method"] = cfg.method;
  j["seed"] = cfg.seed;
  j["outer_iterations"] = cfg.outer_iterations;
  j["expert_rollouts"] = cfg.expert_rollouts;
  j["expert_solver_rounds"] = cfg.expert_solver_rounds;
  j["nominal_rollouts"] = cfg.nominal_rollouts;
  j["rollout_length"] = cfg.rollout_length;
  j["forward"] = ppo_config_to_json(cfg.forward);
  j["warm_start_policy"] = cfg.warm_start_policy;
  j["lambda_init"] = cfg.lambda_init;
  j["entropy_coeff"] = cfg.entropy_coeff;
  j["budget"] = cfg.budget;
  j["backward"] = backward_config_to_json(cfg.backward);
  j["policy_hidden"] = cfg.policy_hidden;
  j["value_hidden"] = cfg.value_hidden;
  j["constraint_hidden"] = cfg.constraint_hidden;
  j["constraint_features"] = cfg.constraint_features;
  j["ablation"] = json{{"use_importance_sampling", cfg.ablation.use_importance_sampling},
                       {"use_early_stopping", cfg.ablation.use_early_stopping}};
  j["eval_episodes"] = cfg.eval_episodes;
  j["eval_stochastic"] = cfg.eval_stochastic;
  j["bc_epochs"] = cfg.bc_epochs;
  j["gc_outer_iterations"] = cfg.gc_outer_iterations;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  const std::string env = j.value("env", "lapgridworld");
  RunConfig cfg = default_config(env);
  cfg.method = j.value("method", cfg.method);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.outer_iterations = j.value("outer_iterations", cfg.outer_iterations);
  cfg.expert_rollouts = j.value("expert_rollouts", cfg.expert_rollouts);
  cfg.expert_solver_rounds = j.value("expert_solver_rounds", cfg.expert_solver_rounds);
  cfg.nominal_rollouts = j.value("nominal_rollouts", cfg.nominal_rollouts);
  cfg.rollout_length = j.value("rollout_length", cfg.rollout_length);
  if (j.contains("forward")) ppo_config_from_json(j.at("forward"), cfg.forward);
  cfg.warm_start_policy = j.value("warm_start_policy", cfg.warm_start_policy);
  cfg.lambda_init = j.value("lambda_init", cfg.lambda_init);
  cfg.entropy_coeff = j.value("entropy_coeff", cfg.entropy_coeff);
  cfg.budget = j.value("budget", cfg.budget);
  if (j.contains("backward")) backward_config_from_json(j.at("backward"), cfg.backward);
  cfg.policy_hidden = j.value("policy_hidden", cfg.policy_hidden);
  cfg.value_hidden = j.value("value_hidden", cfg.value_hidden);
  cfg.constraint_hidden = j.value("constraint_hidden", cfg.constraint_hidden);
  cfg.constraint_features = j.value("constraint_features", cfg.constraint_features);
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    cfg.ablation.use_importance_sampling =
        a.value("use_importance_sampling", cfg.ablation.use_importance_sampling);
    cfg.ablation.use_early_stopping =
        a.value("use_early_stopping", cfg.ablation.use_early_stopping);
  }
  cfg.eval_episodes = j.value("eval_episodes", cfg.eval_episodes);
  cfg.eval_stochastic = j.value("eval_stochastic", cfg.eval_stochastic);
  cfg.bc_epochs = j.value("bc_epochs", cfg.bc_epochs);
  cfg.gc_outer_iterations = j.value("gc_outer_iterations", cfg.gc_outer_iterations);
  validate_config(cfg);
  return cfg;
}

std::string run_config_hash(const RunConfig& cfg) {
  const std::string s = run_config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

std::string metrics_csv_header() {
  return "timesteps,outer_iteration,true_reward,violation_rate,nominal_reward,lambda,"
         "forward_kl_bound,reverse_kl_bound,backward_iterations";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::ostringstream out;
  out << r.timesteps << ',' << r.outer_iteration << ',' << format_double(r.true_reward) << ','
      << format_double(r.violation_rate) << ',' << format_double(r.nominal_reward) << ','
      << format_double(r.lambda) << ',' << format_double(r.forward_kl_bound) << ','
      << format_double(r.reverse_kl_bound) << ',' << r.backward_iterations;
  return out.str();
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty metrics file: " + path.string());
  if (line != metrics_csv_header()) throw IoError("unexpected metrics header in " + path.string());
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    MetricsRecord r;
    auto next = [&]() {
      if (!std::getline(row, field, ',')) throw IoError("short metrics row in " + path.string());
      return field;
    };
    r.timesteps = std::stol(next());
    r.outer_iteration = std::stoi(next());
    r.true_reward = std::stod(next());
    r.violation_rate = std::stod(next());
    r.nominal_reward = std::stod(next());
    r.lambda = std::stod(next());
    r.forward_kl_bound = std::stod(next());
    r.reverse_kl_bound = std::stod(next());
    r.backward_iterations = std::stoi(next());
    out.push_back(r);
  }
  return out;
}

MetricsRecord evaluate(const Env& env, const PolicyBundle& bundle, int episodes, int horizon,
                       bool stochastic, std::mt19937_64& rng) {
  MetricsRecord rec;
  if (episodes <= 0) throw ConfigError("evaluate: episodes must be positive");
  double true_sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    true_sum += run_episode(env, bundle, EnvMode::constrained, horizon, stochastic, rng)
                    .total_reward();
  }
  double nominal_sum = 0.0;
  long violations = 0;
  long steps = 0;
  for (int e = 0; e < episodes; ++e) {
    const Trajectory traj =
        run_episode(env, bundle, EnvMode::nominal, horizon, stochastic, rng);
    nominal_sum += traj.total_reward();
    for (const auto& tr : traj.transitions) {
      violations += env.true_violation(tr.state, tr.action) ? 1 : 0;
      ++steps;
    }
  }
  rec.true_reward = true_sum / episodes;
  rec.nominal_reward = nominal_sum / episodes;
  rec.violation_rate = steps > 0 ? static_cast<double>(violations) / steps : 0.0;
  return rec;
}

namespace {

bool trajectory_clean(const Env& env, const Trajectory& traj) {
  if (traj.empty() || !traj.stitched()) return false;
  for (const auto& tr : traj.transitions) {
    if (!std::isfinite(tr.reward)) return false;
    if (env.true_violation(tr.state, tr.action)) return false;
  }
  const auto& last = traj.transitions.back();
  return !env.true_violation(last.next_state, last.action);
}

int effective_horizon(const Env& env, const RunConfig& cfg) {
  return cfg.rollout_length > 0 ? cfg.rollout_length : env.spec().horizon;
}

PpoConfig forward_config(const Env& env, const RunConfig& cfg) {
  PpoConfig f = cfg.forward;
  f.horizon = effective_horizon(env, cfg);
  return f;
}

void create_run_dir(const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create run directory " + out_dir.string() + ": " + ec.message());
}

CostFn constraint_cost(const Env& env, const ConstraintNet& net) {
  return [&env, &net](std::span<const double> state, std::span<const double> action) {
    return 1.0 - net.score_pair(env, state, action);
  };
}

// Append-as-you-go metrics writer so aborted runs keep partial artifacts.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw IoError("cannot open metrics file for writing: " + path.string());
    out_ << metrics_csv_header() << "\n";
    out_.flush();
  }
  void write(const MetricsRecord& rec) {
    records.push_back(rec);
    out_ << metrics_csv_row(rec) << "\n";
    out_.flush();
  }
  std::vector<MetricsRecord> records;

 private:
  std::ofstream out_;
};

}  // namespace

std::vector<Trajectory> generate_expert(const Env& env, const RunConfig& cfg,
                                        std::mt19937_64& rng) {
  PpoConfig ecfg = forward_config(env, cfg);
  ecfg.rounds = cfg.expert_solver_rounds > 0 ? cfg.expert_solver_rounds : 2 * cfg.forward.rounds;

  PolicyBundle bundle =
      make_policy_bundle(env.spec(), cfg.policy_hidden, cfg.value_hidden, cfg.lambda_init,
                         cfg.entropy_coeff, cfg.budget, rng);
  ForwardSolver solver = make_forward_solver(std::move(bundle), ecfg.learning_rate);

  const CostFn true_cost = [&env](std::span<const double> state,
                                  std::span<const double> action) {
    return env.true_violation(state, action) ? 1.0 : 0.0;
  };
  const SolveReport report =
      solve_forward(solver, env, true_cost, EnvMode::constrained, ecfg, rng);
  if (!report.converged) {
    throw ConvergenceError("expert training did not converge on " + env.spec().name +
                           " (final expected cost " + format_double(report.final_cost) +
                           "); refusing to export demonstrations");
  }

  const int horizon = effective_horizon(env, cfg);
  std::vector<Trajectory> dataset;
  constexpr int kMaxAttemptsPerRollout = 200;
  for (int i = 0; i < cfg.expert_rollouts; ++i) {
    bool recorded = false;
    for (int attempt = 0; attempt < kMaxAttemptsPerRollout; ++attempt) {
      Trajectory traj =
          run_episode(env, solver.bundle, EnvMode::constrained, horizon, /*stochastic=*/true,
                      rng);
      if (trajectory_clean(env, traj)) {
        dataset.push_back(std::move(traj));
        recorded = true;
        break;
      }
    }
    if (!recorded) {
      throw ConvergenceError(
          "expert policy keeps violating constraints; refusing to export demonstrations");
    }
  }
  lint_expert_dataset(env, dataset);
  return dataset;
}

namespace {

std::vector<Trajectory> obtain_expert(const Env& env, const RunConfig& cfg,
                                      std::optional<std::vector<Trajectory>>& provided,
                                      const std::filesystem::path& run_dir) {
  std::vector<Trajectory> expert;
  if (provided.has_value()) {
    expert = std::move(*provided);
  } else {
    std::mt19937_64 rng = make_rng(cfg.seed, rng_stream::expert);
    expert = generate_expert(env, cfg, rng);
  }
  lint_expert_dataset(env, expert);
  write_trajectories(run_dir / "expert_data.jsonl", env, expert);
  return expert;
}

void write_run_report(const std::filesystem::path& run_dir, const RunConfig& cfg,
                      bool converged, const std::string& status) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "run_report";
  j["status"] = status;
  j["forward_converged"] = converged;
  j["config_hash"] = run_config_hash(cfg);
  write_json_file(run_dir / "run_report.json", j);
}

}  // namespace

RunResult run_icrl(const RunConfig& cfg, const std::filesystem::path& out_dir,
                   std::optional<std::vector<Trajectory>> expert_data) {
  validate_config(cfg);
  create_run_dir(out_dir);
  const auto env = make_env(cfg.env);
  write_json_file(out_dir / "config.json", run_config_to_json(cfg));

  RunResult result;
  result.run_dir = out_dir;

  std::vector<Trajectory> expert = obtain_expert(*env, cfg, expert_data, out_dir);

  std::mt19937_64 constraint_rng = make_rng(cfg.seed, rng_stream::init_constraint);
  std::mt19937_64 rollout_rng = make_rng(cfg.seed, rng_stream::rollouts);
  std::mt19937_64 backward_rng = make_rng(cfg.seed, rng_stream::backward);
  std::mt19937_64 eval_rng = make_rng(cfg.seed, rng_stream::eval);

  ConstraintNet znet =
      make_constraint_net(*env, cfg.constraint_hidden, cfg.constraint_features, constraint_rng);
  nn::AdamState zopt = nn::make_adam(znet.net, cfg.backward.learning_rate);

  auto fresh_solver = [&](std::uint64_t iteration) {
    std::mt19937_64 rng = make_rng(split_seed(cfg.seed, iteration), rng_stream::init_policy);
    PolicyBundle bundle =
        make_policy_bundle(env->spec(), cfg.policy_hidden, cfg.value_hidden, cfg.lambda_init,
                           cfg.entropy_coeff, cfg.budget, rng);
    return make_forward_solver(std::move(bundle), cfg.forward.learning_rate);
  };
  ForwardSolver solver = fresh_solver(0);

  BackwardConfig bcfg = cfg.backward;
  bcfg.use_importance_sampling = cfg.ablation.use_importance_sampling;
  bcfg.use_early_stopping = cfg.ablation.use_early_stopping;

  const PpoConfig fcfg = forward_config(*env, cfg);
  const int horizon = effective_horizon(*env, cfg);

  MetricsWriter metrics(out_dir / "metrics.csv");
  long timesteps = 0;

  auto save_nets = [&]() {
    write_json_file(out_dir / "zeta.json", constraint_net_to_json(znet));
    json policy = policy_bundle_to_json(solver.bundle);
    policy["config_hash"] = run_config_hash(cfg);
    write_json_file(out_dir / "policy.json", policy);
  };

  MetricsRecord rec =
      evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic, eval_rng);
  rec.lambda = solver.bundle.lambda;
  metrics.write(rec);
  save_nets();

  try {
    const CostFn cost = constraint_cost(*env, znet);
    for (int iteration = 1; iteration <= cfg.outer_iterations; ++iteration) {
      if (!cfg.warm_start_policy) solver = fresh_solver(iteration);
      const SolveReport report =
          solve_forward(solver, *env, cost, EnvMode::nominal, fcfg, rollout_rng);
      result.forward_converged = report.converged;
      timesteps += report.env_steps;

      std::vector<Trajectory> nominal;
      nominal.reserve(cfg.nominal_rollouts);
      for (int k = 0; k < cfg.nominal_rollouts; ++k) {
        Trajectory traj = run_episode(*env, solver.bundle, EnvMode::nominal, horizon,
                                      /*stochastic=*/true, rollout_rng);
        timesteps += traj.length();
        nominal.push_back(std::move(traj));
      }

      const PhaseReport phase =
          backward_phase(znet, expert, nominal, *env, bcfg, zopt, backward_rng);

      rec = evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic,
                     eval_rng);
      rec.timesteps = timesteps;
      rec.outer_iteration = iteration;
      rec.lambda = solver.bundle.lambda;
      rec.forward_kl_bound = phase.final_bounds.forward_bound;
      rec.reverse_kl_bound = phase.final_bounds.reverse_bound;
      rec.backward_iterations = phase.iterations_run;
      metrics.write(rec);
      save_nets();
    }
  } catch (...) {
    save_nets();
    write_run_report(out_dir, cfg, result.forward_converged, "aborted");
    throw;
  }

  result.metrics = metrics.records;
  write_run_report(out_dir, cfg, result.forward_converged, "completed");
  return result;
}

RunResult run_bc(const RunConfig& cfg, const std::filesystem::path& out_dir,
                 std::optional<std::vector<Trajectory>> expert_data) {
  validate_config(cfg);
  create_run_dir(out_dir);
  const auto env = make_env(cfg.env);
  write_json_file(out_dir / "config.json", run_config_to_json(cfg));

  RunResult result;
  result.run_dir = out_dir;

  std::vector<Trajectory> expert = obtain_expert(*env, cfg, expert_data, out_dir);

  std::mt19937_64 policy_rng = make_rng(cfg.seed, rng_stream::init_policy);
  std::mt19937_64 rollout_rng = make_rng(cfg.seed, rng_stream::rollouts);
  std::mt19937_64 baseline_rng = make_rng(cfg.seed, rng_stream::baseline);
  std::mt19937_64 eval_rng = make_rng(cfg.seed, rng_stream::eval);

  const PpoConfig fcfg = forward_config(*env, cfg);
  const int horizon = effective_horizon(*env, cfg);

  // Frozen nominal dataset from an unconstrained nominal policy.
  PolicyBundle nominal_bundle =
      make_policy_bundle(env->spec(), cfg.policy_hidden, cfg.value_hidden, /*lambda=*/0.0,
                         cfg.entropy_coeff, cfg.budget, policy_rng);
  ForwardSolver nominal_solver =
      make_forward_solver(std::move(nominal_bundle), fcfg.learning_rate);
  const CostFn zero_cost = [](std::span<const double>, std::span<const double>) {
    return 0.0;
  };
  PpoConfig nominal_cfg = fcfg;
  nominal_cfg.lambda_lr = 0.0;
  solve_forward(nominal_solver, *env, zero_cost, EnvMode::nominal, nominal_cfg, rollout_rng);
  std::vector<Trajectory> nominal;
  for (int k = 0; k < cfg.nominal_rollouts; ++k) {
    nominal.push_back(run_episode(*env, nominal_solver.bundle, EnvMode::nominal, horizon,
                                  /*stochastic=*/true, rollout_rng));
  }

  BcConfig bc_cfg;
  bc_cfg.epochs = cfg.bc_epochs;
  bc_cfg.minibatch_size = cfg.backward.minibatch_size;
  bc_cfg.learning_rate = cfg.backward.learning_rate;
  bc_cfg.hidden = cfg.constraint_hidden;
  bc_cfg.input_features = cfg.constraint_features;
  BcResult bc = bc_train(expert, nominal, *env, bc_cfg, baseline_rng);
  write_json_file(out_dir / "zeta.json", constraint_net_to_json(bc.net));

  // One constrained solve against the frozen classifier.
  PolicyBundle bundle =
      make_policy_bundle(env->spec(), cfg.policy_hidden, cfg.value_hidden, cfg.lambda_init,
                         cfg.entropy_coeff, cfg.budget, policy_rng);
  ForwardSolver solver = make_forward_solver(std::move(bundle), fcfg.learning_rate);

  MetricsWriter metrics(out_dir / "metrics.csv");
  MetricsRecord rec =
      evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic, eval_rng);
  rec.lambda = solver.bundle.lambda;
  metrics.write(rec);

  PpoConfig full_cfg = fcfg;
  full_cfg.rounds = std::max(1, cfg.outer_iterations) * fcfg.rounds;
  const SolveReport report = solve_forward(solver, *env, constraint_cost(*env, bc.net),
                                           EnvMode::nominal, full_cfg, rollout_rng);
  result.forward_converged = report.converged;

  rec = evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic,
                 eval_rng);
  rec.timesteps = report.env_steps;
  rec.outer_iteration = 1;
  rec.lambda = solver.bundle.lambda;
  metrics.write(rec);

  json policy = policy_bundle_to_json(solver.bundle);
  policy["config_hash"] = run_config_hash(cfg);
  write_json_file(out_dir / "policy.json", policy);
  result.metrics = metrics.records;
  write_run_report(out_dir, cfg, result.forward_converged, "completed");
  return result;
}

RunResult run_gc(const RunConfig& cfg, const std::filesystem::path& out_dir,
                 std::optional<std::vector<Trajectory>> expert_data) {
  validate_config(cfg);
  create_run_dir(out_dir);
  const auto env = make_env(cfg.env);
  write_json_file(out_dir / "config.json", run_config_to_json(cfg));

  RunResult result;
  result.run_dir = out_dir;

  std::vector<Trajectory> expert = obtain_expert(*env, cfg, expert_data, out_dir);
  std::mt19937_64 baseline_rng = make_rng(cfg.seed, rng_stream::baseline);
  std::mt19937_64 eval_rng = make_rng(cfg.seed, rng_stream::eval);

  const int horizon = effective_horizon(*env, cfg);

  GcConfig gc_cfg;
  gc_cfg.outer_iterations = cfg.gc_outer_iterations > 0
                                ? cfg.gc_outer_iterations
                                : std::max(1, cfg.outer_iterations) * cfg.forward.rounds;
  gc_cfg.discriminator_minibatch = cfg.backward.minibatch_size;
  gc_cfg.discriminator_learning_rate = cfg.backward.learning_rate;
  gc_cfg.hidden = cfg.constraint_hidden;
  gc_cfg.input_features = cfg.constraint_features;
  gc_cfg.ppo = forward_config(*env, cfg);

  MetricsWriter metrics(out_dir / "metrics.csv");
  {
    std::mt19937_64 init_rng = make_rng(cfg.seed, rng_stream::init_policy);
    PolicyBundle probe = make_policy_bundle(env->spec(), cfg.policy_hidden, cfg.value_hidden,
                                            0.0, cfg.entropy_coeff, cfg.budget, init_rng);
    MetricsRecord rec =
        evaluate(*env, probe, cfg.eval_episodes, horizon, cfg.eval_stochastic, eval_rng);
    metrics.write(rec);
  }

  GcResult gc = gc_train(*env, expert, gc_cfg, baseline_rng);
  result.forward_converged = true;  // unconstrained PPO has no cost target

  MetricsRecord rec = evaluate(*env, gc.solver.bundle, cfg.eval_episodes, horizon,
                               cfg.eval_stochastic, eval_rng);
  rec.timesteps = gc.report.env_steps;
  rec.outer_iteration = 1;
  metrics.write(rec);

  write_json_file(out_dir / "zeta.json", constraint_net_to_json(gc.discriminator));
  json policy = policy_bundle_to_json(gc.solver.bundle);
  policy["config_hash"] = run_config_hash(cfg);
  write_json_file(out_dir / "policy.json", policy);
  result.metrics = metrics.records;
  write_run_report(out_dir, cfg, true, "completed");
  return result;
}

RunResult run_nominal(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  create_run_dir(out_dir);
  const auto env = make_env(cfg.env);
  write_json_file(out_dir / "config.json", run_config_to_json(cfg));

  std::mt19937_64 policy_rng = make_rng(cfg.seed, rng_stream::init_policy);
  std::mt19937_64 rollout_rng = make_rng(cfg.seed, rng_stream::rollouts);
  std::mt19937_64 eval_rng = make_rng(cfg.seed, rng_stream::eval);

  const PpoConfig fcfg = forward_config(*env, cfg);
  const int horizon = effective_horizon(*env, cfg);

  PolicyBundle bundle = make_policy_bundle(env->spec(), cfg.policy_hidden, cfg.value_hidden,
                                           /*lambda=*/0.0, cfg.entropy_coeff, cfg.budget,
                                           policy_rng);
  ForwardSolver solver = make_forward_solver(std::move(bundle), fcfg.learning_rate);

  RunResult result;
  result.run_dir = out_dir;
  MetricsWriter metrics(out_dir / "metrics.csv");
  MetricsRecord rec =
      evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic, eval_rng);
  metrics.write(rec);

  const CostFn zero_cost = [](std::span<const double>, std::span<const double>) {
    return 0.0;
  };
  PpoConfig full_cfg = fcfg;
  full_cfg.rounds = std::max(1, cfg.outer_iterations) * fcfg.rounds;
  full_cfg.lambda_lr = 0.0;
  const SolveReport report =
      solve_forward(solver, *env, zero_cost, EnvMode::nominal, full_cfg, rollout_rng);
  result.forward_converged = report.converged;

  rec = evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic,
                 eval_rng);
  rec.timesteps = report.env_steps;
  rec.outer_iteration = 1;
  metrics.write(rec);

  json policy = policy_bundle_to_json(solver.bundle);
  policy["config_hash"] = run_config_hash(cfg);
  write_json_file(out_dir / "policy.json", policy);
  result.metrics = metrics.records;
  write_run_report(out_dir, cfg, true, "completed");
  return result;
}

RunResult run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                       std::optional<std::vector<Trajectory>> expert_data) {
  if (cfg.method == "icrl") return run_icrl(cfg, out_dir, std::move(expert_data));
  if (cfg.method == "bc") return run_bc(cfg, out_dir, std::move(expert_data));
  if (cfg.method == "gc") return run_gc(cfg, out_dir, std::move(expert_data));
  if (cfg.method == "nominal") return run_nominal(cfg, out_dir);
  throw ConfigError("unknown method: " + cfg.method);
}

RunResult transfer(const std::filesystem::path& source_constraint, const RunConfig& cfg,
                   const std::filesystem::path& out_dir) {
  validate_config(cfg);
  create_run_dir(out_dir);
  const auto env = make_env(cfg.env);
  write_json_file(out_dir / "config.json", run_config_to_json(cfg));

  ConstraintNet znet = constraint_net_from_json(read_json_file(source_constraint));

  // Remap declared features onto the target by name.
  std::vector<int> remapped;
  std::vector<std::string> missing;
  const auto& target_names = env->spec().feature_names;
  for (const std::string& name : znet.feature_names) {
    const auto it = std::find(target_names.begin(), target_names.end(), name);
    if (it == target_names.end()) {
      missing.push_back(name);
    } else {
      remapped.push_back(static_cast<int>(std::distance(target_names.begin(), it)));
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ConfigError("transfer: target environment '" + cfg.env +
                      "' does not provide features: " + list);
  }
  znet.input_features = remapped;

  std::mt19937_64 policy_rng = make_rng(cfg.seed, rng_stream::init_policy);
  std::mt19937_64 rollout_rng = make_rng(cfg.seed, rng_stream::rollouts);
  std::mt19937_64 eval_rng = make_rng(cfg.seed, rng_stream::eval);

  const PpoConfig fcfg = forward_config(*env, cfg);
  const int horizon = effective_horizon(*env, cfg);

  PolicyBundle bundle =
      make_policy_bundle(env->spec(), cfg.policy_hidden, cfg.value_hidden, cfg.lambda_init,
                         cfg.entropy_coeff, cfg.budget, policy_rng);
  ForwardSolver solver = make_forward_solver(std::move(bundle), fcfg.learning_rate);

  RunResult result;
  result.run_dir = out_dir;
  MetricsWriter metrics(out_dir / "metrics.csv");
  MetricsRecord rec =
      evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic, eval_rng);
  rec.lambda = solver.bundle.lambda;
  metrics.write(rec);

  PpoConfig full_cfg = fcfg;
  full_cfg.rounds = std::max(1, cfg.outer_iterations) * fcfg.rounds;
  const SolveReport report = solve_forward(solver, *env, constraint_cost(*env, znet),
                                           EnvMode::nominal, full_cfg, rollout_rng);
  result.forward_converged = report.converged;

  rec = evaluate(*env, solver.bundle, cfg.eval_episodes, horizon, cfg.eval_stochastic,
                 eval_rng);
  rec.timesteps = report.env_steps;
  rec.outer_iteration = 1;
  rec.lambda = solver.bundle.lambda;
  metrics.write(rec);

  write_json_file(out_dir / "zeta.json", constraint_net_to_json(znet));
  json policy = policy_bundle_to_json(solver.bundle);
  policy["config_hash"] = run_config_hash(cfg);
  write_json_file(out_dir / "policy.json", policy);
  result.metrics = metrics.records;
  write_run_report(out_dir, cfg, result.forward_converged, "completed");
  return result;
}

ExportPaths export_plot_data(const std::filesystem::path& run_parent,
                             const std::filesystem::path& out_dir) {
  struct SeedRun {
    std::uint64_t seed;
    std::vector<MetricsRecord> metrics;
  };
  std::vector<SeedRun> runs;
  if (!std::filesystem::is_directory(run_parent)) {
    throw IoError("export: not a directory: " + run_parent.string());
  }
  std::vector<std::filesystem::path> candidates;
  if (std::filesystem::exists(run_parent / "metrics.csv")) {
    candidates.push_back(run_parent);
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(run_parent)) {
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "metrics.csv")) {
        candidates.push_back(entry.path());
      }
    }
  }
  for (const auto& dir : candidates) {
    SeedRun run;
    run.seed = 0;
    const auto config_path = dir / "config.json";
    if (std::filesystem::exists(config_path)) {
      run.seed = read_json_file(config_path).value("seed", 0ull);
    }
    run.metrics = read_metrics_csv(dir / "metrics.csv");
    runs.push_back(std::move(run));
  }
  if (runs.empty()) throw IoError("export: no metrics.csv found under " + run_parent.string());
  std::sort(runs.begin(), runs.end(),
            [](const SeedRun& a, const SeedRun& b) { return a.seed < b.seed; });

  create_run_dir(out_dir);
  ExportPaths paths;
  paths.long_csv = out_dir / "curves_long.csv";
  paths.aggregate_csv = out_dir / "curves_aggregate.csv";

  const std::vector<std::pair<std::string, double MetricsRecord::*>> metrics_fields = {
      {"true_reward", &MetricsRecord::true_reward},
      {"violation_rate", &MetricsRecord::violation_rate},
      {"nominal_reward", &MetricsRecord::nominal_reward},
      {"lambda", &MetricsRecord::lambda}};

  std::ofstream longf(paths.long_csv);
  if (!longf) throw IoError("cannot write " + paths.long_csv.string());
  longf << "timestep,seed,metric,value\n";
  for (const auto& run : runs) {
    for (const auto& rec : run.metrics) {
      for (const auto& [name, member] : metrics_fields) {
        longf << rec.timesteps << ',' << run.seed << ',' << name << ','
              << format_double(rec.*member) << "\n";
      }
    }
  }

  std::size_t shortest = runs.front().metrics.size();
  std::size_t longest = shortest;
  for (const auto& run : runs) {
    shortest = std::min(shortest, run.metrics.size());
    longest = std::max(longest, run.metrics.size());
  }

  std::ofstream aggf(paths.aggregate_csv);
  if (!aggf) throw IoError("cannot write " + paths.aggregate_csv.string());
  aggf << "timestep,metric,mean,stderr\n";
  const double n = static_cast<double>(runs.size());
  for (std::size_t row = 0; row < shortest; ++row) {
    for (const auto& [name, member] : metrics_fields) {
      double mean = 0.0;
      for (const auto& run : runs) mean += run.metrics[row].*member;
      mean /= n;
      double var = 0.0;
      for (const auto& run : runs) {
        const double d = run.metrics[row].*member - mean;
        var += d * d;
      }
      const double stderr_value = runs.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0;
      aggf << runs.front().metrics[row].timesteps << ',' << name << ',' << format_double(mean)
           << ',' << format_double(stderr_value) << "\n";
    }
  }
  if (longest != shortest) {
    // Mixed-length seeds: explicit warning row (timestep -1) recording how
    // many rows were dropped from the longest run.
    aggf << "-1,warning_truncated_to_shortest," << shortest << ',' << (longest - shortest)
         << "\n";
  }
  return paths;
}

}  // namespace icrl
