#pragma once

// Builtin test games.
//
//   test1            f = a1 + a2, psi_i = a_i^2/2, on [-50, 50]
//   test2            as test1 with psi_i = k_i x + a_i^2/2 (explicit solution)
//   test2-perturbed  psi_i = k_i x - delta cos(x) + a_i^2/2, controls in [-300, 300]
//   test3            f = (a2, a1), psi_i = |x| outside the unit ball, on [-2, 2]^2
//   test4            f = (a1 + a2, a1 - a2), psi_i = |x|^2, on [-2, 2]^2

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nashsl/error.hpp"
#include "nashsl/game.hpp"
#include "nashsl/grid.hpp"
#include "nashsl/solver.hpp"

namespace nashsl {

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"test1", "test2", "test2-perturbed", "test3",
                                              "test4"};
  return names;
}

/// Tunable parameters of a builtin. Unset fields take the builtin's default;
/// `builtin_problem` returns a copy with every field resolved.
struct ProblemParams {
  std::string name;
  std::optional<double> k1;
  std::optional<double> k2;
  std::optional<double> delta;
  std::optional<double> domain_lower;
  std::optional<double> domain_upper;
  std::optional<std::size_t> grid_nodes;
  std::optional<double> control_lower;
  std::optional<double> control_upper;
  std::optional<std::size_t> controls_per_player;
  std::optional<double> discount1;
  std::optional<double> discount2;

  friend bool operator==(const ProblemParams&, const ProblemParams&) = default;
};

/// Hamiltonians of a 1D game, H_i(x, p1, p2), for residual checks.
using Hamiltonian1D = std::function<std::array<double, 2>(double, double, double)>;

struct ProblemSetup {
  ProblemParams params;
  GameProblem problem;
  GridSpec grid;
  ControlGrid controls;
  SolverConfig config;
  /// Closed-form solutions; for test1 these are the three formal solutions.
  std::vector<ReferenceSolution> references;
  /// Whether references[0] is the true solution of this game (and not a
  /// comparison baseline).
  bool has_exact_solution = false;
  std::optional<Hamiltonian1D> hamiltonian;
};

namespace detail {

inline ProblemParams resolve(ProblemParams p, double lo, double hi, std::size_t nodes,
                             double clo, double chi, std::size_t ncontrols) {
  p.k1 = p.k1.value_or(-1.0);
  p.k2 = p.k2.value_or(2.0);
  p.delta = p.delta.value_or(2.0);
  p.domain_lower = p.domain_lower.value_or(lo);
  p.domain_upper = p.domain_upper.value_or(hi);
  p.grid_nodes = p.grid_nodes.value_or(nodes);
  p.control_lower = p.control_lower.value_or(clo);
  p.control_upper = p.control_upper.value_or(chi);
  p.controls_per_player = p.controls_per_player.value_or(ncontrols);
  p.discount1 = p.discount1.value_or(1.0);
  p.discount2 = p.discount2.value_or(1.0);
  return p;
}

inline double max_abs(double a, double b) { return std::max(std::abs(a), std::abs(b)); }

/// f = a1 + a2, psi_i = h_i(x) + a_i^2/2.
inline GameProblem scalar_game(const std::string& name, const ProblemParams& p,
                               std::array<ScalarFieldFn, 2> running) {
  GameProblem g;
  g.name = name;
  g.state_dim = 1;
  g.dynamics = [](const Point&, ControlTuple a) { return Point{a[0] + a[1], 0.0}; };
  for (std::size_t i = 0; i < 2; ++i) {
    g.costs.push_back([hi = running[i], i](const Point& x, ControlTuple a) {
      return hi(x) + 0.5 * a[i] * a[i];
    });
  }
  g.discounts = {*p.discount1, *p.discount2};
  const ControlBounds b{*p.control_lower, *p.control_upper};
  g.control_bounds = {b, b};
  g.f_inf_norm = 2.0 * max_abs(b.lower, b.upper);
  return g;
}

/// lambda_i u_i = H_i with H_i = -p_i (p_i/2 + p_j) + h_i(x).
inline Hamiltonian1D scalar_hamiltonian(std::array<ScalarFieldFn, 2> running) {
  return [running](double x, double p1, double p2) {
    const Point pt{x, 0.0};
    return std::array<double, 2>{-p1 * (0.5 * p1 + p2) + running[0](pt),
                                 -p2 * (0.5 * p2 + p1) + running[1](pt)};
  };
}

inline ReferenceSolution explicit_lines(const std::string& name, double k1, double k2) {
  ReferenceSolution r;
  r.name = name;
  r.values = {[=](const Point& x) { return k1 * x[0] - k1 * k2 - 0.5 * k1 * k1; },
              [=](const Point& x) { return k2 * x[0] - k1 * k2 - 0.5 * k2 * k2; }};
  r.feedback = {[=](const Point&) { return -k1; }, [=](const Point&) { return -k2; }};
  return r;
}

inline std::vector<ReferenceSolution> test1_formal_solutions() {
  ReferenceSolution zero;
  zero.name = "u";
  zero.values = {[](const Point&) { return 0.0; }, [](const Point&) { return 0.0; }};
  zero.feedback = zero.values;

  ReferenceSolution bar;
  bar.name = "ubar";
  bar.values = {[](const Point& x) {
                  const double r = std::abs(x[0]);
                  return r >= 1.0 ? 0.0 : -0.5 * (1.0 - r) * (1.0 - r);
                },
                [](const Point&) { return 0.0; }};
  bar.feedback = {[](const Point& x) {
                    const double r = std::abs(x[0]);
                    // a1 = -u1'(x) = -(1 - |x|) sign(x) inside the unit interval.
                    return r >= 1.0 ? 0.0 : -(1.0 - r) * (x[0] > 0 ? 1.0 : x[0] < 0 ? -1.0 : 0.0);
                  },
                  [](const Point&) { return 0.0; }};

  ReferenceSolution hat;
  hat.name = "uhat";
  hat.values = {[](const Point& x) { return -0.5 * x[0] * x[0]; },
                [](const Point&) { return 0.0; }};
  hat.feedback = {[](const Point& x) { return x[0]; }, [](const Point&) { return 0.0; }};
  return {zero, bar, hat};
}

inline SolverConfig constant_config(double guess, double boundary, int max_iterations) {
  SolverConfig c;
  c.initial_guess.kind = GuessKind::Constant;
  c.initial_guess.constant = guess;
  c.boundary.kind = BoundaryKind::Constant;
  c.boundary.values = {boundary, boundary};
  c.max_iterations = max_iterations;
  return c;
}

inline ProblemSetup one_dimensional(const ProblemParams& in) {
  ProblemSetup s;
  const bool perturbed = in.name == "test2-perturbed";
  const double cbound = perturbed ? 300.0 : 10.0;
  s.params = resolve(in, -50.0, 50.0, 51, -cbound, cbound, 101);
  const ProblemParams& p = s.params;

  std::array<ScalarFieldFn, 2> running;
  if (p.name == "test1") {
    running = {[](const Point&) { return 0.0; }, [](const Point&) { return 0.0; }};
  } else {
    const double k1 = *p.k1, k2 = *p.k2;
    if (!(k1 < 0.0 && 0.0 < k2) || k1 + k2 == 0.0) {
      throw ConfigError("test2 needs k1 < 0 < k2 and k1 + k2 != 0");
    }
    const double delta = perturbed ? *p.delta : 0.0;
    running = {[=](const Point& x) { return k1 * x[0] - delta * std::cos(x[0]); },
               [=](const Point& x) { return k2 * x[0] - delta * std::cos(x[0]); }};
  }

  s.problem = scalar_game(p.name, p, running);
  s.grid = GridSpec::line(*p.domain_lower, *p.domain_upper, *p.grid_nodes);
  const std::array<std::size_t, 2> counts{*p.controls_per_player, *p.controls_per_player};
  s.controls = ControlGrid::uniform(s.problem.control_bounds, counts);
  s.hamiltonian = scalar_hamiltonian(running);

  if (p.name == "test1") {
    s.references = test1_formal_solutions();
    s.has_exact_solution = true;
    s.config = constant_config(150.0, 150.0, 1000);
  } else if (!perturbed) {
    s.references = {explicit_lines("exact", *p.k1, *p.k2)};
    s.has_exact_solution = true;
    s.config = constant_config(150.0, 150.0, 2000);
    s.config.boundary.kind = BoundaryKind::Exact;
    // Early iterates lack a pure Nash pair at a few nodes.
    s.config.on_no_nash = NoNashPolicy::FreezeAndFlag;
  } else {
    s.references = {explicit_lines("unperturbed", *p.k1, *p.k2)};
    s.has_exact_solution = false;
    s.config = constant_config(100.0, 100.0, 20000);
    s.config.boundary.kind = BoundaryKind::Exact;
  }
  return s;
}

inline ProblemSetup two_dimensional(const ProblemParams& in) {
  ProblemSetup s;
  s.params = resolve(in, -2.0, 2.0, 51, -1.0, 1.0, 3);
  const ProblemParams& p = s.params;
  GameProblem& g = s.problem;
  g.name = p.name;
  g.state_dim = 2;
  const ControlBounds b{*p.control_lower, *p.control_upper};
  g.control_bounds = {b, b};
  g.discounts = {*p.discount1, *p.discount2};
  const double amax = max_abs(b.lower, b.upper);
  if (p.name == "test3") {
    g.dynamics = [](const Point&, ControlTuple a) { return Point{a[1], a[0]}; };
    const CostFn cost = [](const Point& x, ControlTuple) {
      const double r = std::hypot(x[0], x[1]);
      return r > 1.0 ? r : 0.0;
    };
    g.costs = {cost, cost};
    g.f_inf_norm = amax;
  } else {
    g.dynamics = [](const Point&, ControlTuple a) {
      return Point{a[0] + a[1], a[0] - a[1]};
    };
    const CostFn cost = [](const Point& x, ControlTuple) { return x[0] * x[0] + x[1] * x[1]; };
    g.costs = {cost, cost};
    g.f_inf_norm = 2.0 * amax;
  }
  s.grid = GridSpec::square(*p.domain_lower, *p.domain_upper, *p.grid_nodes);
  const std::array<std::size_t, 2> counts{*p.controls_per_player, *p.controls_per_player};
  s.controls = ControlGrid::uniform(g.control_bounds, counts);
  s.config = constant_config(150.0, 150.0, 1000);
  return s;
}

}  // namespace detail

/// Builds a builtin game with its grid, control sets and default solver
/// configuration.
inline ProblemSetup builtin_problem(const ProblemParams& params) {
  const std::string& n = params.name;
  if (n == "test1" || n == "test2" || n == "test2-perturbed") {
    return detail::one_dimensional(params);
  }
  if (n == "test3" || n == "test4") return detail::two_dimensional(params);
  std::string known;
  for (const auto& b : builtin_names()) known += (known.empty() ? "" : ", ") + b;
  throw ConfigError("unknown problem '" + n + "' (builtins: " + known + ")");
}

inline ProblemSetup builtin_problem(const std::string& name) {
  ProblemParams p;
  p.name = name;
  return builtin_problem(p);
}

}  // namespace nashsl
