#include "icrl/env.hpp"

#include <algorithm>
#include <cmath>

#include "icrl/tabular.hpp"

namespace icrl {

double Trajectory::total_reward() const {
  double r = 0.0;
  for (const auto& t : transitions) r += t.reward;
  return r;
}

double Trajectory::discounted_reward(double gamma) const {
  double r = 0.0;
  double g = 1.0;
  for (const auto& t : transitions) {
    r += g * t.reward;
    g *= gamma;
  }
  return r;
}

bool Trajectory::stitched() const {
  for (std::size_t i = 0; i + 1 < transitions.size(); ++i) {
    if (transitions[i].next_state != transitions[i + 1].state) return false;
  }
  return true;
}

tabular::TabularMDP Env::to_tabular() const {
  throw ConfigError("to_tabular: environment '" + spec_.name + "' is not finite");
}

double point_circle_reward(double x, double y, double dx, double dy, bool literal_numerator) {
  const double numerator = literal_numerator ? (y * dx - x * dx) : (x * dy - y * dx);
  return numerator / (1.0 + std::abs(std::hypot(x, y) - 10.0));
}

namespace {

std::vector<double> one_hot(int size, int index) {
  std::vector<double> v(size, 0.0);
  v[index] = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// LapGridWorld: ring of the 40 perimeter cells of an 11x11 grid. Two actions,
// clockwise (0) and counter-clockwise (1). Entering a dollar tile pays 3.
// Dollar tiles sit on every fourth perimeter cell, so lapping pays 0.75/step
// while rocking back and forth over one tile pays 1.5/step; the cheat is the
// nominal optimum. The hidden constraint forbids counter-clockwise moves.
// ---------------------------------------------------------------------------
class LapGridWorld final : public Env {
 public:
  static constexpr int kCells = 40;  // 4 * 11 - 4
  static constexpr int kDollarSpacing = 4;
  static constexpr double kDollarReward = 3.0;

  LapGridWorld() {
    spec_.name = "lapgridworld";
    spec_.state_dim = 1;
    spec_.discrete_actions = true;
    spec_.num_actions = 2;
    spec_.horizon = 200;
    spec_.discount = 0.99;
    spec_.observation_dim = kCells;
    for (int s = 0; s < kCells; ++s) spec_.feature_names.push_back("cell" + std::to_string(s));
    spec_.feature_names.push_back("cw");
    spec_.feature_names.push_back("ccw");
  }

  std::vector<double> reset(std::uint64_t) const override { return {0.0}; }

  Transition step(std::span<const double> state, std::span<const double> action,
                  EnvMode mode) const override {
    const int cell = static_cast<int>(state[0]);
    const int a = static_cast<int>(action[0]);
    if (a != 0 && a != 1) throw ConfigError("lapgridworld: invalid action index");
    const int next = (a == 0) ? (cell + 1) % kCells : (cell + kCells - 1) % kCells;
    Transition tr;
    tr.state = {static_cast<double>(cell)};
    tr.action = {static_cast<double>(a)};
    tr.next_state = {static_cast<double>(next)};
    tr.reward = (next % kDollarSpacing == 0) ? kDollarReward : 0.0;
    tr.done = (mode == EnvMode::constrained) && true_violation(state, action);
    return tr;
  }

  bool true_violation(std::span<const double>, std::span<const double> action) const override {
    return static_cast<int>(action[0]) == 1;
  }

  std::vector<double> observe(std::span<const double> state) const override {
    return one_hot(kCells, static_cast<int>(state[0]));
  }

  std::vector<double> pair_features(std::span<const double> state,
                                    std::span<const double> action) const override {
    std::vector<double> f(kCells + 2, 0.0);
    f[static_cast<int>(state[0])] = 1.0;
    f[kCells + static_cast<int>(action[0])] = 1.0;
    return f;
  }

  bool is_tabular() const override { return true; }

  tabular::TabularMDP to_tabular() const override {
    tabular::TabularMDP m;
    m.num_states = kCells;
    m.num_actions = 2;
    m.initial_state = 0;
    m.horizon = spec_.horizon;
    m.discount = spec_.discount;
    m.next_state.resize(m.pair_count());
    m.reward.resize(m.pair_count());
    for (int s = 0; s < kCells; ++s) {
      for (int a = 0; a < 2; ++a) {
        const int next = (a == 0) ? (s + 1) % kCells : (s + kCells - 1) % kCells;
        m.next_state[m.idx(s, a)] = next;
        m.reward[m.idx(s, a)] = (next % kDollarSpacing == 0) ? kDollarReward : 0.0;
      }
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// BridgesGridWorld: 7x7 grid, start bottom-left, goal bottom-right, -1 per
// step until the goal plus a potential-shaping term on goal distance (the
// shaping leaves the optimal policy unchanged but densifies the signal).
// A three-column gorge (x in {2,3,4}) can be crossed only over the lower
// bridge (y = 0) or the upper bridge (y = 3). The lower bridge cells are
// the hidden constraint.
// ---------------------------------------------------------------------------
class BridgesGridWorld final : public Env {
 public:
  static constexpr int kSize = 7;
  static constexpr int kCells = kSize * kSize;
  static constexpr int kStart = 0;              // (0, 0)
  static constexpr int kGoal = kSize - 1;       // (6, 0)

  BridgesGridWorld() {
    spec_.name = "bridgesgridworld";
    spec_.state_dim = 1;
    spec_.discrete_actions = true;
    spec_.num_actions = 4;  // up, down, left, right
    spec_.horizon = 50;
    spec_.discount = 0.99;
    spec_.observation_dim = kCells;
    for (int s = 0; s < kCells; ++s) spec_.feature_names.push_back("cell" + std::to_string(s));
    for (const char* a : {"up", "down", "left", "right"}) spec_.feature_names.push_back(a);
  }

  static int cell_of(int x, int y) { return y * kSize + x; }
  static bool is_water(int x, int y) { return x >= 2 && x <= 4 && y != 0 && y != 3; }
  static bool is_lower_bridge(int cell) {
    const int x = cell % kSize;
    const int y = cell / kSize;
    return y == 0 && x >= 2 && x <= 4;
  }
  static double goal_distance(int cell) {
    const int x = cell % kSize;
    const int y = cell / kSize;
    return std::abs(x - (kSize - 1)) + std::abs(y);
  }

  std::vector<double> reset(std::uint64_t) const override {
    return {static_cast<double>(kStart)};
  }

  Transition step(std::span<const double> state, std::span<const double> action,
                  EnvMode mode) const override {
    const int cell = static_cast<int>(state[0]);
    const int a = static_cast<int>(action[0]);
    if (a < 0 || a >= 4) throw ConfigError("bridgesgridworld: invalid action index");
    Transition tr;
    tr.state = {static_cast<double>(cell)};
    tr.action = {static_cast<double>(a)};
    const int next = next_cell(cell, a);
    tr.next_state = {static_cast<double>(next)};
    if (cell == kGoal) {
      // Absorbing goal.
      tr.next_state = {static_cast<double>(kGoal)};
      tr.reward = 0.0;
      tr.done = true;
      return tr;
    }
    tr.reward = step_reward(cell, next);
    tr.done = (next == kGoal) ||
              ((mode == EnvMode::constrained) && true_violation(state, action));
    return tr;
  }

  static double step_reward(int cell, int next) {
    return -1.0 + 0.5 * (goal_distance(cell) - goal_distance(next));
  }

  bool true_violation(std::span<const double> state, std::span<const double>) const override {
    return is_lower_bridge(static_cast<int>(state[0]));
  }

  std::vector<double> observe(std::span<const double> state) const override {
    return one_hot(kCells, static_cast<int>(state[0]));
  }

  std::vector<double> pair_features(std::span<const double> state,
                                    std::span<const double> action) const override {
    std::vector<double> f(kCells + 4, 0.0);
    f[static_cast<int>(state[0])] = 1.0;
    f[kCells + static_cast<int>(action[0])] = 1.0;
    return f;
  }

  bool is_tabular() const override { return true; }

  tabular::TabularMDP to_tabular() const override {
    tabular::TabularMDP m;
    m.num_states = kCells;
    m.num_actions = 4;
    m.initial_state = kStart;
    m.horizon = spec_.horizon;
    m.discount = spec_.discount;
    m.next_state.resize(m.pair_count());
    m.reward.resize(m.pair_count());
    for (int s = 0; s < kCells; ++s) {
      for (int a = 0; a < 4; ++a) {
        if (s == kGoal) {
          m.next_state[m.idx(s, a)] = kGoal;
          m.reward[m.idx(s, a)] = 0.0;
        } else {
          const int next = next_cell(s, a);
          m.next_state[m.idx(s, a)] = next;
          m.reward[m.idx(s, a)] = step_reward(s, next);
        }
      }
    }
    return m;
  }

 private:
  static int next_cell(int cell, int a) {
    int x = cell % kSize;
    int y = cell / kSize;
    int nx = x, ny = y;
    switch (a) {
      case 0: ny = y + 1; break;
      case 1: ny = y - 1; break;
      case 2: nx = x - 1; break;
      case 3: nx = x + 1; break;
    }
    if (nx < 0 || nx >= kSize || ny < 0 || ny >= kSize || is_water(nx, ny)) {
      return cell;  // blocked: stay in place
    }
    return cell_of(nx, ny);
  }
};

// ---------------------------------------------------------------------------
// PointMass family: planar point with position state (x, y) and a bounded
// velocity action. Leftward motion is geared 2.5x faster than rightward, the
// stand-in for "moving backwards is easier". Reward is distance covered per
// step; the hidden constraint region is x <= -3.
// ---------------------------------------------------------------------------
class PointMass : public Env {
 public:
  static constexpr double kLeftGain = 0.5;
  static constexpr double kRightGain = 0.2;
  static constexpr double kYGain = 0.2;
  static constexpr double kMinX = -40.0, kMaxX = 10.0;
  static constexpr double kMinY = -10.0, kMaxY = 10.0;
  static constexpr double kViolationX = -3.0;
  static constexpr double kFeatureScale = 10.0;

  explicit PointMass(std::string name = "pointmass") {
    spec_.name = std::move(name);
    spec_.state_dim = 2;
    spec_.discrete_actions = false;
    spec_.action_dim = 2;
    spec_.horizon = 150;
    spec_.discount = 0.99;
    spec_.observation_dim = 2;
    spec_.feature_names = {"x/10", "y/10", "ax", "ay"};
  }

  std::vector<double> reset(std::uint64_t) const override { return {0.0, 0.0}; }

  Transition step(std::span<const double> state, std::span<const double> action,
                  EnvMode mode) const override {
    Transition tr;
    tr.state.assign(state.begin(), state.end());
    tr.action.assign(action.begin(), action.end());
    const double ax = std::clamp(action[0], -1.0, 1.0);
    const double ay = effective_ay(std::clamp(action[1], -1.0, 1.0));
    const double dx = (ax < 0.0) ? kLeftGain * ax : kRightGain * ax;
    const double dy = kYGain * ay;
    const double nx = std::clamp(state[0] + dx, kMinX, kMaxX);
    const double ny = std::clamp(state[1] + dy, kMinY, kMaxY);
    tr.next_state = {nx, ny};
    tr.reward = step_reward(state[0], state[1], nx - state[0], ny - state[1]);
    tr.done = (mode == EnvMode::constrained) && true_violation(state, action);
    return tr;
  }

  bool true_violation(std::span<const double> state, std::span<const double>) const override {
    return state[0] <= kViolationX;
  }

  std::vector<double> observe(std::span<const double> state) const override {
    return {state[0] / kFeatureScale, state[1] / kFeatureScale};
  }

  std::vector<double> pair_features(std::span<const double> state,
                                    std::span<const double> action) const override {
    return {state[0] / kFeatureScale, state[1] / kFeatureScale, action[0], action[1]};
  }

 protected:
  virtual double effective_ay(double ay) const { return ay; }
  virtual double step_reward(double, double, double dx, double dy) const {
    return std::hypot(dx, dy);
  }
};

// Transfer target: the y actuator is disabled (torque hard-coded to zero).
class PointMassBroken final : public PointMass {
 public:
  PointMassBroken() : PointMass("pointmassbroken") {}

 protected:
  double effective_ay(double) const override { return 0.0; }
};

// Transfer target with a different reward: circulate counter-clockwise on a
// radius-10 circle.
class PointCircle final : public PointMass {
 public:
  explicit PointCircle(bool literal_numerator)
      : PointMass(literal_numerator ? "pointcircle-literal" : "pointcircle"),
        literal_numerator_(literal_numerator) {}

 protected:
  double step_reward(double x, double y, double dx, double dy) const override {
    return point_circle_reward(x, y, dx, dy, literal_numerator_);
  }

 private:
  bool literal_numerator_;
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "lapgridworld") return std::make_unique<LapGridWorld>();
  if (name == "bridgesgridworld") return std::make_unique<BridgesGridWorld>();
  if (name == "pointmass") return std::make_unique<PointMass>();
  if (name == "pointmassbroken") return std::make_unique<PointMassBroken>();
  if (name == "pointcircle") return std::make_unique<PointCircle>(false);
  if (name == "pointcircle-literal") return std::make_unique<PointCircle>(true);
  throw ConfigError("unknown environment: " + name);
}

std::vector<std::string> env_names() {
  return {"lapgridworld", "bridgesgridworld", "pointmass",
          "pointmassbroken", "pointcircle", "pointcircle-literal"};
}

}  // namespace icrl
