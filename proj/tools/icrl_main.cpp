// Command line front end: expert generation, training (icrl/bc/gc),
// constraint transfer, policy evaluation, plot-data export, and the
// importance-sampling / early-stopping ablation grid.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icrl/checkpoint.hpp"
#include "icrl/dataset.hpp"
#include "icrl/driver.hpp"
#include "icrl/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitIo = 4;

struct ConfigFlags {
  std::string config_file;
  std::string env;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::optional<int> outer_iterations;
  std::optional<int> expert_rollouts;
  std::optional<int> rollout_length;
  std::optional<int> backward_iterations;
  std::optional<double> regularizer_weight;
  std::optional<double> budget;
  std::optional<double> entropy_coeff;
  bool no_importance_sampling = false;
  bool no_early_stopping = false;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags, bool need_method) {
  cmd->add_option("--config", flags.config_file, "JSON config file (flags override it)");
  cmd->add_option("--env", flags.env, "environment name");
  if (need_method) {
    cmd->add_option("--method", flags.method, "training method: icrl, bc, gc or nominal");
  }
  cmd->add_option("--iterations", flags.outer_iterations, "outer iterations N");
  cmd->add_option("--expert-rollouts", flags.expert_rollouts, "expert rollout count");
  cmd->add_option("--rollout-length", flags.rollout_length, "episode horizon override");
  cmd->add_option("--backward-iterations", flags.backward_iterations,
                  "backward iterations B per phase");
  cmd->add_option("--regularizer-weight", flags.regularizer_weight,
                  "constraint sparsity regularizer weight");
  cmd->add_option("--budget", flags.budget, "constraint budget alpha");
  cmd->add_option("--entropy-coeff", flags.entropy_coeff, "policy entropy bonus 1/beta");
  cmd->add_flag("--no-importance-sampling", flags.no_importance_sampling,
                "ablation: unit importance weights");
  cmd->add_flag("--no-early-stopping", flags.no_early_stopping,
                "ablation: ignore the KL thresholds");
}

icrl::RunConfig build_config(const ConfigFlags& flags) {
  nlohmann::json j;
  if (!flags.config_file.empty()) {
    j = icrl::read_json_file(flags.config_file);
  }
  if (!flags.env.empty()) j["env"] = flags.env;
  if (!j.contains("env")) throw icrl::ConfigError("--env (or a config file) is required");
  if (!flags.method.empty()) j["method"] = flags.method;
  icrl::RunConfig cfg = icrl::run_config_from_json(j);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.outer_iterations) cfg.outer_iterations = *flags.outer_iterations;
  if (flags.expert_rollouts) cfg.expert_rollouts = *flags.expert_rollouts;
  if (flags.rollout_length) cfg.rollout_length = *flags.rollout_length;
  if (flags.backward_iterations) cfg.backward.iterations = *flags.backward_iterations;
  if (flags.regularizer_weight) cfg.backward.regularizer_weight = *flags.regularizer_weight;
  if (flags.budget) cfg.budget = *flags.budget;
  if (flags.entropy_coeff) cfg.entropy_coeff = *flags.entropy_coeff;
  if (flags.no_importance_sampling) cfg.ablation.use_importance_sampling = false;
  if (flags.no_early_stopping) cfg.ablation.use_early_stopping = false;
  return cfg;
}

std::optional<std::vector<icrl::Trajectory>> maybe_load_expert(
    const std::string& path, const icrl::RunConfig& cfg) {
  if (path.empty()) return std::nullopt;
  icrl::Dataset ds = icrl::read_trajectories(path);
  if (ds.header.env_name != cfg.env) {
    throw icrl::ConfigError("expert dataset was recorded on '" + ds.header.env_name +
                            "', not '" + cfg.env + "'");
  }
  return ds.trajectories;
}

void print_final_metrics(const icrl::RunResult& result) {
  if (result.metrics.empty()) return;
  const icrl::MetricsRecord& last = result.metrics.back();
  std::cout << "final: true_reward=" << last.true_reward
            << " violation_rate=" << last.violation_rate
            << " nominal_reward=" << last.nominal_reward << " lambda=" << last.lambda << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint learning laboratory"};
  app.require_subcommand(1);

  // -- expert --------------------------------------------------------------
  ConfigFlags expert_flags;
  std::uint64_t expert_seed = 0;
  std::string expert_out;
  CLI::App* expert_cmd = app.add_subcommand("expert", "train a constrained expert and record"
                                                      " demonstrations");
  add_config_flags(expert_cmd, expert_flags, /*need_method=*/false);
  expert_cmd->add_option("--seed", expert_seed, "random seed")->required();
  expert_cmd->add_option("--out", expert_out, "output dataset (JSON lines)")->required();

  // -- train ---------------------------------------------------------------
  ConfigFlags train_flags;
  std::uint64_t train_seed = 0;
  std::string train_out_dir;
  std::string train_expert_data;
  CLI::App* train_cmd = app.add_subcommand("train", "run icrl (or a baseline) end to end");
  add_config_flags(train_cmd, train_flags, /*need_method=*/true);
  train_cmd->add_option("--seed", train_seed, "random seed")->required();
  train_cmd->add_option("--out-dir", train_out_dir, "run directory")->required();
  train_cmd->add_option("--expert-data", train_expert_data,
                        "expert dataset (generated when omitted)");

  // -- transfer ------------------------------------------------------------
  ConfigFlags transfer_flags;
  std::uint64_t transfer_seed = 0;
  std::string transfer_out_dir;
  std::string transfer_source;
  CLI::App* transfer_cmd =
      app.add_subcommand("transfer", "solve a target environment with a frozen constraint net");
  add_config_flags(transfer_cmd, transfer_flags, /*need_method=*/false);
  transfer_cmd->add_option("--source", transfer_source, "source constraint checkpoint")
      ->required();
  transfer_cmd->add_option("--seed", transfer_seed, "random seed")->required();
  transfer_cmd->add_option("--out-dir", transfer_out_dir, "run directory")->required();

  // -- evaluate ------------------------------------------------------------
  std::string eval_policy;
  std::string eval_env;
  int eval_episodes = 10;
  bool eval_stochastic = false;
  std::uint64_t eval_seed = 0;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "report true reward and violation rate"
                                                      " of a policy checkpoint");
  eval_cmd->add_option("--policy", eval_policy, "policy checkpoint")->required();
  eval_cmd->add_option("--env", eval_env, "environment name")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval_cmd->add_flag("--stochastic", eval_stochastic, "sample actions instead of the mode");
  eval_cmd->add_option("--seed", eval_seed, "random seed");

  // -- export --------------------------------------------------------------
  std::string export_run_dir;
  std::string export_out_dir;
  CLI::App* export_cmd =
      app.add_subcommand("export", "write long-format and aggregate CSV curves");
  export_cmd->add_option("--run-dir", export_run_dir, "directory of per-seed runs")->required();
  export_cmd->add_option("--out-dir", export_out_dir, "output directory (default: run dir)");

  // -- ablate --------------------------------------------------------------
  ConfigFlags ablate_flags;
  std::vector<std::uint64_t> ablate_seeds;
  std::string ablate_out_dir;
  std::string ablate_expert_data;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "run the importance-sampling / early-stopping ablation grid");
  add_config_flags(ablate_cmd, ablate_flags, /*need_method=*/false);
  ablate_cmd->add_option("--seeds", ablate_seeds, "seeds to sweep")->required();
  ablate_cmd->add_option("--out-dir", ablate_out_dir, "sweep directory")->required();
  ablate_cmd->add_option("--expert-data", ablate_expert_data,
                         "expert dataset shared across the grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (expert_cmd->parsed()) {
      icrl::RunConfig cfg = build_config(expert_flags);
      cfg.seed = expert_seed;
      const auto env = icrl::make_env(cfg.env);
      std::mt19937_64 rng = icrl::make_rng(cfg.seed, icrl::rng_stream::expert);
      const std::vector<icrl::Trajectory> data = icrl::generate_expert(*env, cfg, rng);
      icrl::write_trajectories(expert_out, *env, data);
      std::cout << "wrote " << data.size() << " expert trajectories to " << expert_out << "\n";
    } else if (train_cmd->parsed()) {
      icrl::RunConfig cfg = build_config(train_flags);
      cfg.seed = train_seed;
      auto expert = maybe_load_expert(train_expert_data, cfg);
      const icrl::RunResult result = icrl::run_training(cfg, train_out_dir, std::move(expert));
      print_final_metrics(result);
      std::cout << "run directory: " << result.run_dir.string() << "\n";
    } else if (transfer_cmd->parsed()) {
      icrl::RunConfig cfg = build_config(transfer_flags);
      cfg.seed = transfer_seed;
      const icrl::RunResult result = icrl::transfer(transfer_source, cfg, transfer_out_dir);
      print_final_metrics(result);
      if (!result.forward_converged) {
        std::cerr << "transfer: forward solve did not converge\n";
        return kExitNonConvergence;
      }
    } else if (eval_cmd->parsed()) {
      const auto env = icrl::make_env(eval_env);
      const icrl::PolicyBundle bundle =
          icrl::policy_bundle_from_json(icrl::read_json_file(eval_policy));
      std::mt19937_64 rng = icrl::make_rng(eval_seed, icrl::rng_stream::eval);
      const icrl::MetricsRecord rec = icrl::evaluate(
          *env, bundle, eval_episodes, env->spec().horizon, eval_stochastic, rng);
      nlohmann::json j{{"true_reward", rec.true_reward},
                       {"violation_rate", rec.violation_rate},
                       {"nominal_reward", rec.nominal_reward}};
      std::cout << j.dump(2) << "\n";
    } else if (export_cmd->parsed()) {
      const std::string out = export_out_dir.empty() ? export_run_dir : export_out_dir;
      const icrl::ExportPaths paths = icrl::export_plot_data(export_run_dir, out);
      std::cout << "wrote " << paths.long_csv.string() << " and "
                << paths.aggregate_csv.string() << "\n";
    } else if (ablate_cmd->parsed()) {
      icrl::RunConfig base = build_config(ablate_flags);
      std::optional<std::vector<icrl::Trajectory>> expert;
      for (const bool use_is : {false, true}) {
        for (const bool use_es : {false, true}) {
          for (const std::uint64_t seed : ablate_seeds) {
            icrl::RunConfig cfg = base;
            cfg.seed = seed;
            cfg.ablation.use_importance_sampling = use_is;
            cfg.ablation.use_early_stopping = use_es;
            const std::string tag =
                std::string("is") + (use_is ? "1" : "0") + "_es" + (use_es ? "1" : "0");
            const std::filesystem::path dir =
                std::filesystem::path(ablate_out_dir) / tag / ("seed" + std::to_string(seed));
            expert = maybe_load_expert(ablate_expert_data, cfg);
            const icrl::RunResult result = icrl::run_icrl(cfg, dir, std::move(expert));
            std::cout << tag << " seed " << seed
                      << ": violation_rate=" << result.metrics.back().violation_rate << "\n";
          }
        }
      }
    }
  } catch (const icrl::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const icrl::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const icrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
