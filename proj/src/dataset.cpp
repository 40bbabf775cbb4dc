#include "icrl/dataset.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "icrl/checkpoint.hpp"

namespace icrl {

using nlohmann::json;

void write_trajectories(const std::filesystem::path& path, const Env& env,
                        const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  json header;
  header["format_version"] = kFormatVersion;
  header["kind"] = "trajectory_dataset";
  header["env"] = env.spec().name;
  header["horizon"] = env.spec().horizon;
  out << header.dump() << "\n";
  for (const auto& traj : trajectories) {
    json rec;
    json states = json::array();
    json actions = json::array();
    json rewards = json::array();
    json dones = json::array();
    for (const auto& tr : traj.transitions) {
      states.push_back(tr.state);
      actions.push_back(tr.action);
      rewards.push_back(tr.reward);
      dones.push_back(tr.done);
    }
    if (!traj.transitions.empty()) states.push_back(traj.transitions.back().next_state);
    rec["states"] = std::move(states);
    rec["actions"] = std::move(actions);
    rec["rewards"] = std::move(rewards);
    rec["dones"] = std::move(dones);
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path.string());
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw IoError("invalid dataset header in " + path.string() + ": " + e.what());
  }
  check_container(header, "trajectory_dataset");

  Dataset ds;
  ds.header.format_version = header.at("format_version").get<int>();
  ds.header.env_name = header.at("env").get<std::string>();
  ds.header.horizon = header.at("horizon").get<int>();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError("invalid trajectory at line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto states = rec.at("states").get<std::vector<std::vector<double>>>();
    const auto actions = rec.at("actions").get<std::vector<std::vector<double>>>();
    const auto rewards = rec.at("rewards").get<std::vector<double>>();
    const auto dones = rec.at("dones").get<std::vector<bool>>();
    if (states.size() != actions.size() + 1 || actions.size() != rewards.size() ||
        rewards.size() != dones.size() || actions.empty()) {
      throw IoError("inconsistent trajectory arrays at line " + std::to_string(line_no));
    }
    Trajectory traj;
    for (std::size_t t = 0; t < actions.size(); ++t) {
      Transition tr;
      tr.state = states[t];
      tr.action = actions[t];
      tr.next_state = states[t + 1];
      tr.reward = rewards[t];
      tr.done = dones[t];
      traj.transitions.push_back(std::move(tr));
    }
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

void lint_expert_dataset(const Env& env, const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw ConfigError("expert dataset lint: no trajectories");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& traj = trajectories[i];
    const std::string tag = "expert dataset lint: trajectory " + std::to_string(i);
    if (traj.empty()) throw ConfigError(tag + " is empty");
    if (!traj.stitched()) throw ConfigError(tag + " breaks next-state stitching");
    for (const auto& tr : traj.transitions) {
      if (!std::isfinite(tr.reward)) throw ConfigError(tag + " has a non-finite reward");
      if (env.true_violation(tr.state, tr.action)) {
        throw ConfigError(tag + " contains a true-constraint violation");
      }
    }
    const auto& last = traj.transitions.back();
    if (env.true_violation(last.next_state, last.action)) {
      throw ConfigError(tag + " terminates inside the constrained region");
    }
  }
}

}  // namespace icrl
