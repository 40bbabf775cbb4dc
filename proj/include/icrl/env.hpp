#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "icrl/errors.hpp"

namespace icrl {

namespace tabular {
struct TabularMDP;
}

enum class EnvMode { nominal, constrained };

struct Transition {
  std::vector<double> state;
  std::vector<double> action;  // single element = discrete action index
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> transitions;

  int length() const { return static_cast<int>(transitions.size()); }
  bool empty() const { return transitions.empty(); }
  double total_reward() const;
  double discounted_reward(double gamma) const;
  // next_state of step t must equal state of step t+1.
  bool stitched() const;
};

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  bool discrete_actions = true;
  int num_actions = 0;  // discrete only
  int action_dim = 0;   // continuous only
  int horizon = 0;
  double discount = 1.0;
  int observation_dim = 0;           // policy/value network input size
  std::vector<std::string> feature_names;  // canonical (state, action) feature vector
};

// Environments are stateless: step() is a pure function of (state, action),
// so instances can be shared freely across threads and episodes.
class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  // Initial state; deterministic given seed (our environments have fixed starts).
  virtual std::vector<double> reset(std::uint64_t seed) const = 0;

  virtual Transition step(std::span<const double> state, std::span<const double> action,
                          EnvMode mode) const = 0;

  // Evaluation-only predicate; never consulted by training code.
  virtual bool true_violation(std::span<const double> state,
                              std::span<const double> action) const = 0;

  // Network input for the policy/value heads (one-hot for discrete states).
  virtual std::vector<double> observe(std::span<const double> state) const = 0;

  // Canonical feature vector over (state, action); constraint nets select
  // indices into this vector.
  virtual std::vector<double> pair_features(std::span<const double> state,
                                            std::span<const double> action) const = 0;

  virtual bool is_tabular() const { return false; }
  virtual tabular::TabularMDP to_tabular() const;

  int pair_feature_dim() const { return static_cast<int>(spec_.feature_names.size()); }

 protected:
  EnvSpec spec_;
};

std::unique_ptr<Env> make_env(const std::string& name);
std::vector<std::string> env_names();

// Point-agent circulation reward. The default numerator is x*dy - y*dx; the
// original form (y*dx - x*dx) stays selectable for comparison.
double point_circle_reward(double x, double y, double dx, double dy,
                           bool literal_numerator = false);

}  // namespace icrl
