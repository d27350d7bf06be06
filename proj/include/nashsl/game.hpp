#pragma once

// Differential game definitions: dynamics, running costs, discounts and
// control sets, plus a feedback-trajectory integrator used as an
// independent check on computed value functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nashsl/error.hpp"
#include "nashsl/grid.hpp"

namespace nashsl {

/// Control tuple (a_1, ..., a_m), one scalar per player.
using ControlTuple = std::span<const double>;

using DynamicsFn = std::function<Point(const Point&, ControlTuple)>;
using CostFn = std::function<double(const Point&, ControlTuple)>;
using ScalarFieldFn = std::function<double(const Point&)>;

struct ControlBounds {
  double lower = -1.0;
  double upper = 1.0;

  friend bool operator==(const ControlBounds&, const ControlBounds&) = default;
};

/// An infinite-horizon discounted game with scalar controls.
///
/// Evaluators must be pure: the solver calls them from several threads.
struct GameProblem {
  std::string name;
  std::size_t state_dim = 1;
  std::size_t num_players = 2;
  DynamicsFn dynamics;
  std::vector<CostFn> costs;
  std::vector<double> discounts;
  std::vector<ControlBounds> control_bounds;
  /// Global bound on |f| used for the time step; estimated when empty.
  std::optional<double> f_inf_norm;

  void validate() const {
    if (state_dim < 1 || state_dim > kMaxDim) {
      throw ConfigError("state dimension must be 1 or 2");
    }
    if (num_players < 1) throw ConfigError("a game needs at least one player");
    if (!dynamics) throw ConfigError("game '" + name + "' has no dynamics");
    if (costs.size() != num_players || discounts.size() != num_players ||
        control_bounds.size() != num_players) {
      throw ConfigError("game '" + name +
                        "': costs, discounts and control bounds must have one "
                        "entry per player");
    }
    for (std::size_t i = 0; i < num_players; ++i) {
      if (!costs[i]) throw ConfigError("missing cost for player " + std::to_string(i + 1));
      if (!(discounts[i] > 0.0)) {
        throw ConfigError("discount rate of player " + std::to_string(i + 1) +
                          " must be positive");
      }
      if (!(control_bounds[i].lower <= control_bounds[i].upper)) {
        throw ConfigError("empty control interval for player " +
                          std::to_string(i + 1));
      }
    }
    if (f_inf_norm && !(*f_inf_norm > 0.0)) {
      throw ConfigError("f_inf_norm must be positive");
    }
  }
};

/// Finite control sets A_i^#, one strictly increasing list per player.
struct ControlGrid {
  std::vector<std::vector<double>> values;

  static ControlGrid uniform(std::span<const ControlBounds> bounds,
                             std::span<const std::size_t> counts) {
    if (bounds.size() != counts.size()) {
      throw ConfigError("control grid: one count per player required");
    }
    ControlGrid g;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const auto [lo, hi] = bounds[i];
      const std::size_t n = counts[i];
      if (n == 0) throw ConfigError("control grid: count must be positive");
      std::vector<double> v(n);
      if (n == 1) {
        v[0] = 0.5 * (lo + hi);
      } else {
        for (std::size_t k = 0; k < n; ++k) {
          v[k] = lo + static_cast<double>(k) * (hi - lo) / static_cast<double>(n - 1);
        }
      }
      g.values.push_back(std::move(v));
    }
    return g;
  }

  std::size_t num_players() const noexcept { return values.size(); }
  std::size_t count(std::size_t player) const { return values.at(player).size(); }
  const std::vector<double>& operator[](std::size_t player) const {
    return values.at(player);
  }

  void validate(std::span<const ControlBounds> bounds) const {
    if (values.size() != bounds.size()) {
      throw ConfigError("control grid has " + std::to_string(values.size()) +
                        " players, game has " + std::to_string(bounds.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto& v = values[i];
      if (v.empty()) throw ConfigError("empty control set for player " + std::to_string(i + 1));
      const double slack = 1e-12 * (1.0 + std::abs(bounds[i].lower) + std::abs(bounds[i].upper));
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k] < bounds[i].lower - slack || v[k] > bounds[i].upper + slack) {
          throw ConfigError("control value outside the admissible interval for player " +
                            std::to_string(i + 1));
        }
        if (k > 0 && !(v[k] > v[k - 1])) {
          throw ConfigError("control values must be strictly increasing (player " +
                            std::to_string(i + 1) + ")");
        }
      }
    }
  }

  friend bool operator==(const ControlGrid&, const ControlGrid&) = default;
};

/// Calls `fn(tuple)` for every element of A_1^# x ... x A_m^#, last player
/// varying fastest.
template <typename Fn>
void for_each_control_tuple(const ControlGrid& controls, Fn&& fn) {
  const std::size_t m = controls.num_players();
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> tuple(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (controls.count(i) == 0) return;
    tuple[i] = controls[i][0];
  }
  while (true) {
    fn(ControlTuple(tuple));
    std::size_t p = m;
    while (p > 0) {
      --p;
      if (++idx[p] < controls.count(p)) {
        tuple[p] = controls[p][idx[p]];
        break;
      }
      idx[p] = 0;
      tuple[p] = controls[p][0];
      if (p == 0) return;
    }
    if (m == 0) return;
  }
}

/// max |f_d(x_j, a)| over all nodes, all discrete control tuples and all
/// state components.
inline double estimate_f_norm(const GameProblem& problem, const GridSpec& grid,
                              const ControlGrid& controls) {
  if (grid.size() == 0 || controls.num_players() == 0) {
    throw ConfigError("estimate_f_norm: empty grid or control set");
  }
  double norm = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Point x = grid.node_coords(j);
    for_each_control_tuple(controls, [&](ControlTuple a) {
      const Point v = problem.dynamics(x, a);
      for (std::size_t d = 0; d < grid.dim(); ++d) norm = std::max(norm, std::abs(v[d]));
    });
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericalError("dynamics vanish on every node and control: time step undefined");
  }
  return norm;
}

inline double default_horizon(const GameProblem& problem) {
  const double lam = *std::min_element(problem.discounts.begin(), problem.discounts.end());
  return 20.0 / lam;
}

using FeedbackFn = std::function<double(const Point&)>;

struct Trajectory {
  std::vector<Point> states;
  std::vector<std::vector<double>> controls;
  std::vector<double> costs;
  double dt = 0.0;
  double final_time = 0.0;
  bool exited = false;
  double exit_time = 0.0;
};

/// Explicit Euler integration of y' = f(y, a(y)) from `start`, accumulating
/// sum_k psi_i(y_k, a_k) exp(-lambda_i t_k) dt (left Riemann sum). Stops early
/// and sets `exited` if the state leaves `box`.
inline Trajectory integrate_feedback(const GameProblem& problem, const Point& start,
                                     std::span<const FeedbackFn> feedback, double horizon,
                                     double dt, const GridSpec* box = nullptr) {
  if (!(dt > 0.0) || !(horizon > 0.0)) {
    throw ConfigError("integration needs positive horizon and step");
  }
  if (feedback.size() != problem.num_players) {
    throw ConfigError("one feedback evaluator per player required");
  }
  const std::size_t m = problem.num_players;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));

  Trajectory traj;
  traj.dt = dt;
  traj.costs.assign(m, 0.0);
  traj.states.reserve(steps + 1);
  traj.states.push_back(start);
  std::vector<double> a(m);
  Point y = start;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (std::size_t i = 0; i < m; ++i) a[i] = feedback[i](y);
    for (std::size_t i = 0; i < m; ++i) {
      traj.costs[i] += problem.costs[i](y, a) * std::exp(-problem.discounts[i] * t) * dt;
    }
    traj.controls.push_back(a);
    const Point v = problem.dynamics(y, a);
    for (std::size_t d = 0; d < problem.state_dim; ++d) y[d] += dt * v[d];
    traj.states.push_back(y);
    traj.final_time = t + dt;
    if (box && !box->contains(y, 1e-9)) {
      traj.exited = true;
      traj.exit_time = t + dt;
      break;
    }
  }
  return traj;
}

/// Discounted cost of every player along the feedback trajectory from
/// `start`. Throws TrajectoryExitError if a bounding box is given and the
/// trajectory leaves it.
inline std::vector<double> discounted_cost(const GameProblem& problem, const Point& start,
                                           std::span<const FeedbackFn> feedback,
                                           double horizon, double dt,
                                           const GridSpec* box = nullptr) {
  Trajectory traj = integrate_feedback(problem, start, feedback, horizon, dt, box);
  if (traj.exited) throw TrajectoryExitError(traj.exit_time);
  return traj.costs;
}

/// A closed-form solution of a builtin game, used for initial guesses,
/// boundary data and error tables.
struct ReferenceSolution {
  std::string name;
  std::vector<ScalarFieldFn> values;     // u_i
  std::vector<ScalarFieldFn> feedback;   // a_i^*(x), may be empty
};

}  // namespace nashsl
