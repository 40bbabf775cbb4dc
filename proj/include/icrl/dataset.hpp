#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "icrl/env.hpp"

namespace icrl {

struct DatasetHeader {
  int format_version = 1;
  std::string env_name;
  int horizon = 0;
};

// JSON-lines: a header record, then one trajectory per line holding the
// state sequence (length + 1), actions, rewards, and done flags.
void write_trajectories(const std::filesystem::path& path, const Env& env,
                        const std::vector<Trajectory>& trajectories);

struct Dataset {
  DatasetHeader header;
  std::vector<Trajectory> trajectories;
};

Dataset read_trajectories(const std::filesystem::path& path);

// Asserts stitching, finite rewards, non-emptiness, and the absence of any
// true-constraint violation (including the terminal next state).
// Throws ConfigError with the first offending trajectory on failure.
void lint_expert_dataset(const Env& env, const std::vector<Trajectory>& trajectories);

}  // namespace icrl
