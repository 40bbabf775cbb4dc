// Python bindings for the core operations: environments, GAE, the exact
// tabular MaxEnt solver, importance-weight KL bounds, and the training
// drivers. Configs cross the boundary as JSON strings; the icrl package
// wraps them with dict-friendly helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "icrl/checkpoint.hpp"
#include "icrl/constraint.hpp"
#include "icrl/dataset.hpp"
#include "icrl/driver.hpp"
#include "icrl/env.hpp"
#include "icrl/ppo.hpp"
#include "icrl/rng.hpp"
#include "icrl/tabular.hpp"

namespace py = pybind11;
using namespace icrl;

namespace {

EnvMode mode_from_string(const std::string& mode) {
  if (mode == "nominal") return EnvMode::nominal;
  if (mode == "constrained") return EnvMode::constrained;
  throw ConfigError("unknown env mode: " + mode);
}

py::dict metrics_to_dict(const MetricsRecord& r) {
  py::dict d;
  d["timesteps"] = r.timesteps;
  d["outer_iteration"] = r.outer_iteration;
  d["true_reward"] = r.true_reward;
  d["violation_rate"] = r.violation_rate;
  d["nominal_reward"] = r.nominal_reward;
  d["lambda"] = r.lambda;
  d["forward_kl_bound"] = r.forward_kl_bound;
  d["reverse_kl_bound"] = r.reverse_kl_bound;
  d["backward_iterations"] = r.backward_iterations;
  return d;
}

py::dict run_result_to_dict(const RunResult& result) {
  py::dict d;
  d["run_dir"] = result.run_dir.string();
  d["forward_converged"] = result.forward_converged;
  py::list metrics;
  for (const auto& rec : result.metrics) metrics.append(metrics_to_dict(rec));
  d["metrics"] = metrics;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "inverse constrained reinforcement learning core";

  py::register_exception<ConvergenceError>(m, "ConvergenceError");

  py::class_<Transition>(m, "Transition")
      .def_readonly("state", &Transition::state)
      .def_readonly("action", &Transition::action)
      .def_readonly("next_state", &Transition::next_state)
      .def_readonly("reward", &Transition::reward)
      .def_readonly("done", &Transition::done);

  py::class_<tabular::TabularMDP>(m, "TabularMDP")
      .def(py::init<>())
      .def_readwrite("num_states", &tabular::TabularMDP::num_states)
      .def_readwrite("num_actions", &tabular::TabularMDP::num_actions)
      .def_readwrite("initial_state", &tabular::TabularMDP::initial_state)
      .def_readwrite("horizon", &tabular::TabularMDP::horizon)
      .def_readwrite("discount", &tabular::TabularMDP::discount)
      .def_readwrite("next_state", &tabular::TabularMDP::next_state)
      .def_readwrite("reward", &tabular::TabularMDP::reward);

  py::class_<Env>(m, "Env")
      .def("reset", &Env::reset, py::arg("seed") = 0)
      .def(
          "step",
          [](const Env& env, const std::vector<double>& state,
             const std::vector<double>& action, const std::string& mode) {
            return env.step(state, action, mode_from_string(mode));
          },
          py::arg("state"), py::arg("action"), py::arg("mode") = "nominal")
      .def("true_violation",
           [](const Env& env, const std::vector<double>& state,
              const std::vector<double>& action) {
             return env.true_violation(state, action);
           })
      .def("observe",
           [](const Env& env, const std::vector<double>& state) { return env.observe(state); })
      .def("pair_features",
           [](const Env& env, const std::vector<double>& state,
              const std::vector<double>& action) { return env.pair_features(state, action); })
      .def("to_tabular", &Env::to_tabular)
      .def_property_readonly("name", [](const Env& env) { return env.spec().name; })
      .def_property_readonly("horizon", [](const Env& env) { return env.spec().horizon; })
      .def_property_readonly("discount", [](const Env& env) { return env.spec().discount; })
      .def_property_readonly("discrete_actions",
                             [](const Env& env) { return env.spec().discrete_actions; })
      .def_property_readonly("num_actions",
                             [](const Env& env) { return env.spec().num_actions; })
      .def_property_readonly("feature_names",
                             [](const Env& env) { return env.spec().feature_names; });

  m.def("make_env", &make_env, py::arg("name"));
  m.def("env_names", &env_names);
  m.def("point_circle_reward", &point_circle_reward, py::arg("x"), py::arg("y"), py::arg("dx"),
        py::arg("dy"), py::arg("literal_numerator") = false);

  m.def(
      "gae",
      [](const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
         double lam) { return gae(rewards, values, gamma, lam); },
      py::arg("rewards"), py::arg("values"), py::arg("gamma"), py::arg("lam"));
  m.def("lagrangian_step", &lagrangian_step, py::arg("lam"), py::arg("observed_cost"),
        py::arg("budget"), py::arg("lr"));

  m.def(
      "soft_solve",
      [](const tabular::TabularMDP& mdp, double beta, const std::vector<double>& feasibility) {
        const auto solution = tabular::soft_solve(mdp, beta, feasibility);
        return py::make_tuple(solution.policy, solution.log_partition);
      },
      py::arg("mdp"), py::arg("beta"), py::arg("feasibility"));
  m.def(
      "trajectory_distribution",
      [](const tabular::TabularMDP& mdp, double beta, const std::vector<double>& feasibility,
         std::size_t cap) {
        const auto solution = tabular::soft_solve(mdp, beta, feasibility);
        const auto trajs = tabular::enumerate_trajectories(mdp, cap);
        py::list actions;
        for (const auto& t : trajs) actions.append(t.actions);
        return py::make_tuple(actions, tabular::trajectory_distribution(mdp, solution, trajs));
      },
      py::arg("mdp"), py::arg("beta"), py::arg("feasibility"), py::arg("cap") = 2000000);
  m.def(
      "exact_kl",
      [](const std::vector<double>& p, const std::vector<double>& q) {
        return tabular::exact_kl(p, q);
      },
      py::arg("p"), py::arg("q"));
  m.def(
      "kl_bounds",
      [](const std::vector<double>& weights) {
        const KlBounds b = kl_bounds(weights);
        return py::make_tuple(b.forward_bound, b.reverse_bound);
      },
      py::arg("trajectory_weights"));

  m.def(
      "constraint_scores",
      [](const std::filesystem::path& zeta_path, const std::string& env_name,
         const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
        const ConstraintNet net = constraint_net_from_json(read_json_file(zeta_path));
        const auto env = make_env(env_name);
        std::vector<double> scores;
        scores.reserve(pairs.size());
        for (const auto& [state, action] : pairs) {
          scores.push_back(net.score_pair(*env, state, action));
        }
        return scores;
      },
      py::arg("zeta_path"), py::arg("env_name"), py::arg("pairs"));

  m.def("default_config_json", [](const std::string& env_name) {
    return run_config_to_json(default_config(env_name)).dump();
  });
  m.def(
      "run_training_json",
      [](const std::string& config_json, const std::filesystem::path& out_dir,
         const std::string& expert_path) {
        const RunConfig cfg = run_config_from_json(nlohmann::json::parse(config_json));
        std::optional<std::vector<Trajectory>> expert;
        if (!expert_path.empty()) expert = read_trajectories(expert_path).trajectories;
        return run_result_to_dict(run_training(cfg, out_dir, std::move(expert)));
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("expert_path") = std::string());
  m.def(
      "generate_expert_dataset_json",
      [](const std::string& config_json, const std::filesystem::path& out_path) {
        const RunConfig cfg = run_config_from_json(nlohmann::json::parse(config_json));
        const auto env = make_env(cfg.env);
        std::mt19937_64 rng = make_rng(cfg.seed, rng_stream::expert);
        const auto data = generate_expert(*env, cfg, rng);
        write_trajectories(out_path, *env, data);
        return data.size();
      },
      py::arg("config_json"), py::arg("out_path"));
  m.def(
      "transfer_json",
      [](const std::filesystem::path& source, const std::string& config_json,
         const std::filesystem::path& out_dir) {
        const RunConfig cfg = run_config_from_json(nlohmann::json::parse(config_json));
        return run_result_to_dict(transfer(source, cfg, out_dir));
      },
      py::arg("source_constraint"), py::arg("config_json"), py::arg("out_dir"));
  m.def(
      "export_plot_data",
      [](const std::filesystem::path& run_parent, const std::filesystem::path& out_dir) {
        const ExportPaths paths = export_plot_data(run_parent, out_dir);
        return py::make_tuple(paths.long_csv.string(), paths.aggregate_csv.string());
      },
      py::arg("run_parent"), py::arg("out_dir"));
}
