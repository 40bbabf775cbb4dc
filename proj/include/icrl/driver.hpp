#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icrl/baselines.hpp"
#include "icrl/constraint.hpp"
#include "icrl/env.hpp"
#include "icrl/ppo.hpp"

namespace icrl {

struct AblationFlags {
  bool use_importance_sampling = true;
  bool use_early_stopping = true;
};

// Every knob of a run; the serialized copy stored with each run is sufficient
// to reproduce it bit for bit.
struct RunConfig {
  std::string env = "lapgridworld";
  std::string method = "icrl";  // icrl | bc | gc | nominal
  std::uint64_t seed = 0;

  int outer_iterations = 10;  // N
  int expert_rollouts = 1;
  int expert_solver_rounds = 0;  // 0 = 2 * forward.rounds
  int nominal_rollouts = 20;     // trajectories sampled per backward phase
  int rollout_length = 0;        // 0 = environment default

  PpoConfig forward;
  // Each outer iteration solves the forward problem from a fresh policy by
  // default; warm starting reuses the previous iteration's bundle.
  bool warm_start_policy = false;
  double lambda_init = 1.0;
  double entropy_coeff = 0.0;
  double budget = 0.0;

  BackwardConfig backward;
  std::vector<int> policy_hidden = {64, 64};
  std::vector<int> value_hidden = {64, 64};
  std::vector<int> constraint_hidden = {20};
  std::vector<int> constraint_features;  // empty = full pair-feature vector

  AblationFlags ablation;

  int eval_episodes = 10;
  bool eval_stochastic = false;

  // BC / GC baseline knobs.
  int bc_epochs = 300;
  int gc_outer_iterations = 0;  // 0 = outer_iterations * forward.rounds
};

// Table-backed per-environment defaults.
RunConfig default_config(const std::string& env_name);

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
// Hash of the serialized config, stored in checkpoints.
std::string run_config_hash(const RunConfig& cfg);

struct MetricsRecord {
  long timesteps = 0;
  int outer_iteration = 0;
  double true_reward = 0.0;     // constrained-environment mean return
  double violation_rate = 0.0;  // true violations per step, nominal environment
  double nominal_reward = 0.0;  // nominal-environment mean return
  double lambda = 0.0;
  double forward_kl_bound = 0.0;
  double reverse_kl_bound = 0.0;
  int backward_iterations = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& record);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

// True reward from constrained-mode episodes (terminated on violation);
// violation rate and nominal reward from nominal-mode episodes.
MetricsRecord evaluate(const Env& env, const PolicyBundle& bundle, int episodes, int horizon,
                       bool stochastic, std::mt19937_64& rng);

// Trains an expert against the true constraint indicator and records clean
// rollouts. Throws ConvergenceError instead of exporting a non-converged
// expert's data.
std::vector<Trajectory> generate_expert(const Env& env, const RunConfig& cfg,
                                        std::mt19937_64& rng);

struct RunResult {
  std::filesystem::path run_dir;
  std::vector<MetricsRecord> metrics;
  bool forward_converged = false;
};

// Full alternation of Algorithm-style forward/backward phases, with
// checkpoints, metrics, and the exact config written under out_dir.
RunResult run_icrl(const RunConfig& cfg, const std::filesystem::path& out_dir,
                   std::optional<std::vector<Trajectory>> expert_data = std::nullopt);

RunResult run_bc(const RunConfig& cfg, const std::filesystem::path& out_dir,
                 std::optional<std::vector<Trajectory>> expert_data = std::nullopt);

RunResult run_gc(const RunConfig& cfg, const std::filesystem::path& out_dir,
                 std::optional<std::vector<Trajectory>> expert_data = std::nullopt);

// Constraint-blind agent: plain PPO on the nominal reward. The comparison
// baseline every evaluation needs.
RunResult run_nominal(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Dispatch on cfg.method.
RunResult run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                       std::optional<std::vector<Trajectory>> expert_data = std::nullopt);

// Solves the target environment against a frozen source constraint net; no
// backward phase. Validates the feature declaration against the target.
RunResult transfer(const std::filesystem::path& source_constraint, const RunConfig& cfg,
                   const std::filesystem::path& out_dir);

// Scans seed subdirectories (each holding metrics.csv) and writes
// long-format and mean +/- stderr aggregate CSVs. Mixed-length runs are
// truncated to the shortest with an explicit warning row.
struct ExportPaths {
  std::filesystem::path long_csv;
  std::filesystem::path aggregate_csv;
};
ExportPaths export_plot_data(const std::filesystem::path& run_parent,
                             const std::filesystem::path& out_dir);

}  // namespace icrl
