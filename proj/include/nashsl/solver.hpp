#pragma once

// Semi-Lagrangian fixed-point solver for two-player Nash value functions.
//
// At every interior node x_j and every discrete control pair a the scheme
// needs the interpolation stencil of z = x_j + h f(x_j, a) and the running
// costs psi_i(x_j, a). None of these depend on the iterate, so they are
// tabulated once (`Scheme`) and each sweep only evaluates
//
//   q_i(j, a; U_i) = beta_i (Lambda(a) U_i)_j + gamma_i psi_i(x_j, a),
//   beta_i = 1/(1 + lambda_i h),  gamma_i = lambda_i h/(1 + lambda_i h),
//
// searches the bimatrix game (q_1, q_2) for its first pure Nash pair a*, and
// writes U_i^{k+1}_j = q_i(j, a*; U_i^k) for both players.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nashsl/error.hpp"
#include "nashsl/field_io.hpp"
#include "nashsl/game.hpp"
#include "nashsl/grid.hpp"

namespace nashsl {

enum class NoNashPolicy { Halt, FreezeAndFlag };

enum class GuessKind { Constant, Exact, PerturbedExact, FromFile };

struct InitialGuess {
  GuessKind kind = GuessKind::Constant;
  double constant = 150.0;
  /// Reference solution to project (Exact / PerturbedExact); empty = first.
  std::string solution;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  std::string path;
};

enum class BoundaryKind { Constant, Exact };

/// Dirichlet data held on every boundary node.
struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::Constant;
  std::array<double, 2> values{150.0, 150.0};
  std::string solution;
};

struct SolverConfig {
  std::array<double, 2> tolerances{1e-6, 1e-6};
  int max_iterations = 1000;
  InitialGuess initial_guess;
  BoundaryCondition boundary;
  NoNashPolicy on_no_nash = NoNashPolicy::Halt;
  std::optional<double> time_step_override;
  /// ||f|| used for the time step is multiplied by this factor (>= 1).
  double f_norm_safety = 1.0;
  /// Trailing window for the oscillation/stabilization classification.
  std::size_t oscillation_window = 10;
  /// Stacked indices (player * N + node) whose values are recorded at
  /// every iteration.
  std::vector<std::size_t> trace_indices;

  void validate() const {
    for (double e : tolerances) {
      if (!(e > 0.0)) throw ConfigError("tolerances must be positive");
    }
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (time_step_override && !(*time_step_override > 0.0)) {
      throw ConfigError("time step override must be positive");
    }
    if (!(f_norm_safety >= 1.0)) throw ConfigError("f_norm safety factor must be >= 1");
    if (oscillation_window < 1) throw ConfigError("oscillation window must be >= 1");
  }
};

struct TimeStep {
  double h = 0.0;
  double f_norm = 0.0;
  bool f_norm_estimated = false;
  bool overridden = false;
};

/// h = min(dx) / (safety * ||f||_inf), unless overridden.
inline TimeStep time_step(const GameProblem& problem, const GridSpec& grid,
                          const ControlGrid& controls, const SolverConfig& config) {
  TimeStep ts;
  if (problem.f_inf_norm) {
    ts.f_norm = *problem.f_inf_norm;
  } else {
    ts.f_norm = estimate_f_norm(problem, grid, controls);
    ts.f_norm_estimated = true;
  }
  ts.f_norm *= config.f_norm_safety;
  if (config.time_step_override) {
    ts.h = *config.time_step_override;
    ts.overridden = true;
  } else {
    ts.h = grid.min_dx() / ts.f_norm;
  }
  return ts;
}

struct NashSearchResult {
  bool found = false;
  std::array<double, 2> controls{};
  std::array<std::size_t, 2> indices{};
  std::size_t candidates_checked = 0;
};

/// Reusable buffers for `find_first_pure_nash`.
struct NashScratch {
  std::vector<double> row;
  std::vector<double> column_min;
  std::vector<unsigned char> column_done;
};

/// First pure Nash equilibrium, in lexicographic (i1 outer, i2 inner) order,
/// of the bimatrix game with costs q1(i1, i2), q2(i1, i2): the pair must
/// satisfy q1(i1,i2) <= q1(k,i2) for every k and q2(i1,i2) <= q2(i1,k) for
/// every k. Comparisons are exact.
///
/// Player 2's best responses are computed one row at a time and player 1's
/// column minima lazily, so the search stops as soon as the first pair is
/// confirmed.
template <typename Q1, typename Q2>
NashSearchResult find_first_pure_nash(std::size_t n1, std::size_t n2, Q1&& q1, Q2&& q2,
                                      NashScratch& scratch) {
  NashSearchResult res;
  scratch.row.resize(n2);
  scratch.column_min.resize(n2);
  scratch.column_done.assign(n2, 0);
  for (std::size_t i1 = 0; i1 < n1; ++i1) {
    double row_min = std::numeric_limits<double>::infinity();
    for (std::size_t i2 = 0; i2 < n2; ++i2) {
      const double v = q2(i1, i2);
      scratch.row[i2] = v;
      row_min = std::min(row_min, v);
    }
    for (std::size_t i2 = 0; i2 < n2; ++i2) {
      ++res.candidates_checked;
      if (!(scratch.row[i2] <= row_min)) continue;
      if (!scratch.column_done[i2]) {
        double col_min = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n1; ++k) col_min = std::min(col_min, q1(k, i2));
        scratch.column_min[i2] = col_min;
        scratch.column_done[i2] = 1;
      }
      if (q1(i1, i2) <= scratch.column_min[i2]) {
        res.found = true;
        res.indices = {i1, i2};
        return res;
      }
    }
  }
  return res;
}

/// Dense bimatrix convenience overload: `q1[i1][i2]`, `q2[i1][i2]`.
inline NashSearchResult find_first_pure_nash(const std::vector<std::vector<double>>& q1,
                                             const std::vector<std::vector<double>>& q2) {
  if (q1.empty() || q1.size() != q2.size() || q1[0].empty()) {
    throw ConfigError("bimatrix payoffs must be nonempty and equally shaped");
  }
  NashScratch scratch;
  return find_first_pure_nash(
      q1.size(), q1[0].size(), [&](std::size_t a, std::size_t b) { return q1[a][b]; },
      [&](std::size_t a, std::size_t b) { return q2[a][b]; }, scratch);
}

/// One tabulated entry: stencil of the clamped foot point and both costs.
struct Transition {
  std::array<std::uint32_t, kMaxStencil> nodes{};
  std::array<double, kMaxStencil> weights{};
  std::array<double, 2> cost{};
};

/// Tabulated fully-discrete scheme for a two-player game on a grid.
class Scheme {
 public:
  Scheme(const GameProblem& problem, const GridSpec& grid, const ControlGrid& controls,
         double h)
      : grid_(grid), controls_(controls), h_(h) {
    problem.validate();
    if (problem.num_players != 2) {
      throw ConfigError("the solver handles two-player games only (game '" + problem.name +
                        "' has " + std::to_string(problem.num_players) + ")");
    }
    if (problem.state_dim != grid.dim()) {
      throw ConfigError("game state dimension does not match the grid dimension");
    }
    controls.validate(problem.control_bounds);
    if (!(h > 0.0)) throw ConfigError("time step must be positive");
    if (grid.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw ConfigError("grid too large");
    }
    for (std::size_t p = 0; p < 2; ++p) {
      const double lh = problem.discounts[p] * h;
      beta_[p] = 1.0 / (1.0 + lh);
      gamma_[p] = lh / (1.0 + lh);
    }
    n1_ = controls.count(0);
    n2_ = controls.count(1);
    stencil_size_ = std::size_t{1} << grid.dim();

    slot_of_.assign(grid.size(), kNoSlot);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!grid.is_boundary(j)) {
        slot_of_[j] = interior_.size();
        interior_.push_back(j);
      }
    }

    const std::size_t pairs = n1_ * n2_;
    table_.resize(interior_.size() * pairs);
    std::vector<std::size_t> clamped(interior_.size(), 0);
    std::vector<unsigned char> bad_cost(interior_.size(), 0);
    const auto n_slots = static_cast<std::ptrdiff_t>(interior_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < n_slots; ++s) {
      const std::size_t j = interior_[static_cast<std::size_t>(s)];
      const Point x = grid_.node_coords(j);
      std::array<double, 2> a{};
      for (std::size_t i1 = 0; i1 < n1_; ++i1) {
        for (std::size_t i2 = 0; i2 < n2_; ++i2) {
          a = {controls_[0][i1], controls_[1][i2]};
          const ControlTuple tuple(a);
          const Point v = problem.dynamics(x, tuple);
          Point z = x;
          for (std::size_t d = 0; d < grid_.dim(); ++d) z[d] += h_ * v[d];
          if (!grid_.contains(z)) {
            z = grid_.clamp(z);
            ++clamped[static_cast<std::size_t>(s)];
          }
          const InterpStencil st = interp_stencil(grid_, z);
          Transition& t = table_[static_cast<std::size_t>(s) * pairs + i1 * n2_ + i2];
          for (std::size_t k = 0; k < st.count; ++k) {
            t.nodes[k] = static_cast<std::uint32_t>(st.node_indices[k]);
            t.weights[k] = st.weights[k];
          }
          t.cost = {problem.costs[0](x, tuple), problem.costs[1](x, tuple)};
          if (!std::isfinite(t.cost[0]) || !std::isfinite(t.cost[1])) {
            bad_cost[static_cast<std::size_t>(s)] = 1;
          }
        }
      }
    }
    for (std::size_t s = 0; s < interior_.size(); ++s) {
      if (bad_cost[s]) {
        throw NumericalError("non-finite running cost at node " + std::to_string(interior_[s]));
      }
      clamped_ += clamped[s];
    }
  }

  static constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

  const GridSpec& grid() const noexcept { return grid_; }
  const ControlGrid& controls() const noexcept { return controls_; }
  double h() const noexcept { return h_; }
  double beta(std::size_t player) const { return beta_.at(player); }
  double gamma(std::size_t player) const { return gamma_.at(player); }
  std::size_t n1() const noexcept { return n1_; }
  std::size_t n2() const noexcept { return n2_; }
  std::size_t num_pairs() const noexcept { return n1_ * n2_; }
  std::size_t stencil_size() const noexcept { return stencil_size_; }
  std::span<const std::size_t> interior_nodes() const noexcept { return interior_; }
  std::size_t slot_of(std::size_t node) const { return slot_of_.at(node); }
  bool is_interior(std::size_t node) const { return slot_of_.at(node) != kNoSlot; }
  /// Number of (node, pair) foot points that left the box and were clamped.
  std::size_t clamped_transitions() const noexcept { return clamped_; }

  const Transition& transition(std::size_t slot, std::size_t pair) const {
    return table_[slot * num_pairs() + pair];
  }

  /// (Lambda(a) U)_j for the tabulated pair.
  double interpolate(std::size_t slot, std::size_t pair, std::span<const double> u) const {
    const Transition& t = transition(slot, pair);
    double acc = 0.0;
    for (std::size_t k = 0; k < stencil_size_; ++k) acc += t.weights[k] * u[t.nodes[k]];
    return acc;
  }

  double q(std::size_t player, std::size_t slot, std::size_t pair,
           std::span<const double> u) const {
    return beta_[player] * interpolate(slot, pair, u) +
           gamma_[player] * transition(slot, pair).cost[player];
  }

  NashSearchResult search(std::size_t slot, std::span<const double> u1,
                          std::span<const double> u2, NashScratch& scratch) const {
    NashSearchResult r = find_first_pure_nash(
        n1_, n2_, [&](std::size_t a, std::size_t b) { return q(0, slot, a * n2_ + b, u1); },
        [&](std::size_t a, std::size_t b) { return q(1, slot, a * n2_ + b, u2); }, scratch);
    if (r.found) r.controls = {controls_[0][r.indices[0]], controls_[1][r.indices[1]]};
    return r;
  }

 private:
  GridSpec grid_;
  ControlGrid controls_;
  double h_;
  std::array<double, 2> beta_{};
  std::array<double, 2> gamma_{};
  std::size_t n1_ = 0;
  std::size_t n2_ = 0;
  std::size_t stencil_size_ = 0;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> slot_of_;
  std::vector<Transition> table_;
  std::size_t clamped_ = 0;
};

/// q_i at node j for an arbitrary control pair, evaluated directly from the
/// game's evaluators (no tabulation). Player is 0-based. Foot points outside
/// the box are clamped.
inline double q_value(const GameProblem& problem, std::size_t player, const GridSpec& grid,
                      std::size_t node, const std::array<double, 2>& a,
                      const FieldPair& fields, double h) {
  const Point x = grid.node_coords(node);
  const ControlTuple tuple(a);
  const Point v = problem.dynamics(x, tuple);
  Point z = x;
  for (std::size_t d = 0; d < grid.dim(); ++d) z[d] += h * v[d];
  if (!grid.contains(z)) z = grid.clamp(z);
  const double lh = problem.discounts.at(player) * h;
  const double interp = interp_stencil(grid, z).apply(fields.at(player).values);
  return (1.0 / (1.0 + lh)) * interp + (lh / (1.0 + lh)) * problem.costs[player](x, tuple);
}

/// Exhaustive discrete Nash search at grid node `node` (must be interior).
inline NashSearchResult local_nash_search(const Scheme& scheme, std::size_t node,
                                          const FieldPair& fields) {
  const std::size_t slot = scheme.slot_of(node);
  if (slot == Scheme::kNoSlot) throw ConfigError("Nash search requested at a boundary node");
  NashScratch scratch;
  return scheme.search(slot, fields[0].values, fields[1].values, scratch);
}

enum class FeedbackStatus : std::uint8_t { Boundary, Found, NoNash };

/// Per-node Nash controls a*(x_j) from the latest sweep.
struct FeedbackField {
  GridSpec grid;
  std::vector<std::array<double, 2>> controls;
  std::vector<FeedbackStatus> status;

  FeedbackField() = default;
  explicit FeedbackField(const Scheme& scheme)
      : grid(scheme.grid()),
        controls(scheme.grid().size(), std::array<double, 2>{0.0, 0.0}),
        status(scheme.grid().size(), FeedbackStatus::Boundary) {}

  /// Controls of the interior node nearest to `p`.
  std::array<double, 2> at(const Point& p) const {
    NodeIndex idx = grid.multi_index(grid.nearest_node(p));
    for (std::size_t d = 0; d < grid.dim(); ++d) {
      idx[d] = std::clamp<std::size_t>(idx[d], 1, grid.nodes(d) - 2);
    }
    return controls[grid.linear_index(idx)];
  }
};

struct IterationReport {
  int iteration = 0;
  std::array<double, 2> increments{};
  std::size_t nodes_without_nash = 0;
  bool oscillation_detected = false;
  std::chrono::duration<double> wall_time{};
};

/// One Jacobi sweep U^k -> U^{k+1}. Every interior node reads only `prev`;
/// boundary nodes are copied unchanged. Nodes without a Nash pair keep their
/// previous value under FreezeAndFlag, or raise NoNashError (lowest such
/// node) under Halt.
///
/// `order`, when nonempty, lists interior slots in the order to visit them
/// (serial); otherwise slots are processed in parallel.
inline IterationReport sweep(const Scheme& scheme, const FieldPair& prev, FieldPair& next,
                             FeedbackField& feedback, NoNashPolicy policy, int iteration = 0,
                             std::span<const std::size_t> order = {}) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = scheme.grid().size();
  if (prev[0].size() != n || prev[1].size() != n) {
    throw ConfigError("sweep: fields do not match the grid");
  }
  if (next[0].size() != n || next[1].size() != n) next = prev;
  next[0].values = prev[0].values;
  next[1].values = prev[1].values;

  const auto interior = scheme.interior_nodes();
  std::vector<unsigned char> missing(interior.size(), 0);
  std::span<const double> u1 = prev[0].values;
  std::span<const double> u2 = prev[1].values;

  auto update = [&](std::size_t slot, NashScratch& scratch) {
    const std::size_t j = interior[slot];
    const NashSearchResult r = scheme.search(slot, u1, u2, scratch);
    if (!r.found) {
      missing[slot] = 1;
      feedback.status[j] = FeedbackStatus::NoNash;
      return;
    }
    const std::size_t pair = r.indices[0] * scheme.n2() + r.indices[1];
    next[0].values[j] = scheme.q(0, slot, pair, u1);
    next[1].values[j] = scheme.q(1, slot, pair, u2);
    feedback.controls[j] = r.controls;
    feedback.status[j] = FeedbackStatus::Found;
  };

  if (!order.empty()) {
    NashScratch scratch;
    for (std::size_t slot : order) update(slot, scratch);
  } else {
    const auto n_slots = static_cast<std::ptrdiff_t>(interior.size());
#pragma omp parallel
    {
      NashScratch scratch;
#pragma omp for schedule(static)
      for (std::ptrdiff_t s = 0; s < n_slots; ++s) update(static_cast<std::size_t>(s), scratch);
    }
  }

  IterationReport rep;
  rep.iteration = iteration;
  for (std::size_t s = 0; s < interior.size(); ++s) {
    if (missing[s]) {
      if (policy == NoNashPolicy::Halt) throw NoNashError(interior[s], iteration);
      ++rep.nodes_without_nash;
    }
  }
  for (std::size_t p = 0; p < 2; ++p) {
    if (!next[p].all_finite()) {
      throw NumericalError("non-finite value produced in sweep " + std::to_string(iteration));
    }
    rep.increments[p] = sup_distance(next[p].values, prev[p].values);
  }
  rep.wall_time = std::chrono::steady_clock::now() - start;
  return rep;
}

enum class NodeBehavior : std::uint8_t { Undetermined, Stabilized, Oscillating, Drifting };

/// Classifies every stacked component over a trailing window of W sweeps:
/// stabilized if all W increments are below eps; oscillating (period 2) if
/// for each of the W latest iterates |U^{k+1} - U^{k-1}| < eps while
/// |U^{k+1} - U^k| >= eps.
class OscillationTracker {
 public:
  OscillationTracker(std::size_t nodes, std::size_t window, std::array<double, 2> eps)
      : nodes_(nodes), window_(window), eps_(eps), ring_(window + 2) {}

  void push(const FieldPair& fields) {
    auto& slot = ring_[head_];
    slot.resize(2 * nodes_);
    std::copy(fields[0].values.begin(), fields[0].values.end(), slot.begin());
    std::copy(fields[1].values.begin(), fields[1].values.end(),
              slot.begin() + static_cast<std::ptrdiff_t>(nodes_));
    head_ = (head_ + 1) % ring_.size();
    filled_ = std::min(filled_ + 1, ring_.size());
  }

  bool ready() const noexcept { return filled_ == ring_.size(); }

  NodeBehavior classify(std::size_t r) const {
    if (!ready()) return NodeBehavior::Undetermined;
    const double eps = eps_[r < nodes_ ? 0 : 1];
    bool stable = true;
    bool oscillating = true;
    for (std::size_t m = 0; m < window_; ++m) {
      const double newer = back(m)[r];
      const double mid = back(m + 1)[r];
      const double older = back(m + 2)[r];
      const double step = std::abs(newer - mid);
      if (step >= eps) stable = false;
      if (!(std::abs(newer - older) < eps && step >= eps)) oscillating = false;
    }
    if (stable) return NodeBehavior::Stabilized;
    if (oscillating) return NodeBehavior::Oscillating;
    return NodeBehavior::Drifting;
  }

  std::vector<NodeBehavior> classify_all() const {
    std::vector<NodeBehavior> out(2 * nodes_);
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = classify(r);
    return out;
  }

  bool any_oscillating() const {
    if (!ready()) return false;
    for (std::size_t r = 0; r < 2 * nodes_; ++r) {
      if (classify(r) == NodeBehavior::Oscillating) return true;
    }
    return false;
  }

 private:
  // m = 0 is the most recent iterate.
  const std::vector<double>& back(std::size_t m) const {
    return ring_[(head_ + ring_.size() - 1 - m) % ring_.size()];
  }

  std::size_t nodes_;
  std::size_t window_;
  std::array<double, 2> eps_;
  std::vector<std::vector<double>> ring_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
};

inline const ReferenceSolution& find_reference(std::span<const ReferenceSolution> refs,
                                               const std::string& name) {
  if (refs.empty()) throw ConfigError("the problem has no closed-form solution registered");
  if (name.empty()) return refs.front();
  for (const auto& r : refs) {
    if (r.name == name) return r;
  }
  std::string known;
  for (const auto& r : refs) known += (known.empty() ? "" : ", ") + r.name;
  throw ConfigError("unknown reference solution '" + name + "' (known: " + known + ")");
}

inline FieldPair project(const GridSpec& grid, const ReferenceSolution& ref) {
  if (ref.values.size() != 2) throw ConfigError("reference solution needs two components");
  return {ValueField::sample(grid, ref.values[0]), ValueField::sample(grid, ref.values[1])};
}

/// Deterministic uniform draw in [-1, 1) from a 64-bit engine.
inline double symmetric_uniform(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

/// U^{(0)} from the configured initial guess, with the boundary condition
/// already imposed.
inline FieldPair make_initial_fields(const GridSpec& grid, const SolverConfig& config,
                                     std::span<const ReferenceSolution> refs = {}) {
  const InitialGuess& g = config.initial_guess;
  FieldPair f;
  switch (g.kind) {
    case GuessKind::Constant:
      f = {ValueField(grid, g.constant), ValueField(grid, g.constant)};
      break;
    case GuessKind::Exact:
      f = project(grid, find_reference(refs, g.solution));
      break;
    case GuessKind::PerturbedExact: {
      f = project(grid, find_reference(refs, g.solution));
      std::mt19937_64 rng(g.seed);
      for (auto& field : f) {
        for (double& v : field.values) v += g.amplitude * symmetric_uniform(rng);
      }
      break;
    }
    case GuessKind::FromFile:
      f = read_field_pair(g.path, grid);
      break;
  }

  const BoundaryCondition& bc = config.boundary;
  std::optional<FieldPair> exact;
  if (bc.kind == BoundaryKind::Exact) exact = project(grid, find_reference(refs, bc.solution));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!grid.is_boundary(j)) continue;
    for (std::size_t p = 0; p < 2; ++p) {
      f[p][j] = exact ? (*exact)[p][j] : bc.values[p];
    }
  }
  return f;
}

enum class SolveStatus { Converged, MaxIterations, Halted };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "not-converged";
    case SolveStatus::Halted: return "halted";
  }
  return "?";
}

inline const char* to_string(NodeBehavior b) {
  switch (b) {
    case NodeBehavior::Undetermined: return "undetermined";
    case NodeBehavior::Stabilized: return "stabilized";
    case NodeBehavior::Oscillating: return "oscillating";
    case NodeBehavior::Drifting: return "drifting";
  }
  return "?";
}

inline const char* to_string(NoNashPolicy p) {
  return p == NoNashPolicy::Halt ? "halt" : "freeze-and-flag";
}

struct SolveResult {
  FieldPair fields;
  FeedbackField feedback;
  std::vector<IterationReport> history;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  TimeStep time_step;
  NoNashPolicy policy = NoNashPolicy::Halt;
  std::optional<std::size_t> halted_node;
  /// Classification of every stacked component over the trailing window.
  std::vector<NodeBehavior> behavior;
  /// Values of `SolverConfig::trace_indices`, one vector per index, starting
  /// with the initial guess.
  std::vector<std::vector<double>> traces;
  std::size_t clamped_transitions = 0;
  std::vector<std::string> notes;

  std::size_t count(NodeBehavior b) const {
    return static_cast<std::size_t>(std::count(behavior.begin(), behavior.end(), b));
  }
};

/// Called after every sweep with the iteration number k (1-based) and U^{(k)}.
using IterationObserver = std::function<void(int, const FieldPair&)>;

/// Fixed-point iteration from explicit initial fields (boundary values are
/// taken from `initial` as given).
inline SolveResult solve(const Scheme& scheme, const SolverConfig& config, FieldPair initial,
                         const IterationObserver& observer = {}) {
  config.validate();
  const GridSpec& grid = scheme.grid();
  const std::size_t n = grid.size();
  for (const auto& f : initial) {
    if (f.size() != n) throw ConfigError("initial fields do not match the grid");
    if (!f.all_finite()) throw NumericalError("initial fields contain non-finite values");
  }

  SolveResult res;
  res.policy = config.on_no_nash;
  res.clamped_transitions = scheme.clamped_transitions();
  res.feedback = FeedbackField(scheme);
  res.traces.resize(config.trace_indices.size());
  auto record_traces = [&](const FieldPair& f) {
    for (std::size_t t = 0; t < config.trace_indices.size(); ++t) {
      const std::size_t r = config.trace_indices[t];
      if (r >= 2 * n) throw ConfigError("trace index out of range");
      res.traces[t].push_back(f[r / n][r % n]);
    }
  };

  OscillationTracker tracker(n, config.oscillation_window, config.tolerances);
  FieldPair current = std::move(initial);
  FieldPair next = current;
  tracker.push(current);
  record_traces(current);

  for (int k = 0; k < config.max_iterations; ++k) {
    IterationReport rep;
    try {
      rep = sweep(scheme, current, next, res.feedback, config.on_no_nash, k + 1);
    } catch (const NoNashError& e) {
      res.status = SolveStatus::Halted;
      res.halted_node = e.node();
      res.notes.push_back(e.what());
      break;
    }
    std::swap(current, next);
    tracker.push(current);
    record_traces(current);
    rep.oscillation_detected = tracker.any_oscillating();
    res.history.push_back(rep);
    res.iterations = k + 1;
    if (observer) observer(k + 1, current);
    if (rep.increments[0] < config.tolerances[0] && rep.increments[1] < config.tolerances[1]) {
      res.status = SolveStatus::Converged;
      break;
    }
  }
  res.behavior = tracker.classify_all();
  res.fields = std::move(current);
  return res;
}

/// Full pipeline: time step, tabulation, initial guess, iteration.
inline SolveResult solve(const GameProblem& problem, const GridSpec& grid,
                         const ControlGrid& controls, const SolverConfig& config,
                         std::span<const ReferenceSolution> refs = {},
                         const IterationObserver& observer = {}) {
  config.validate();
  const TimeStep ts = time_step(problem, grid, controls, config);
  const Scheme scheme(problem, grid, controls, ts.h);
  SolveResult res = solve(scheme, config, make_initial_fields(grid, config, refs), observer);
  res.time_step = ts;
  for (std::size_t p = 0; p < 2; ++p) {
    if (problem.discounts[p] != 1.0) {
      res.notes.push_back("player " + std::to_string(p + 1) +
                          " has a non-unit discount rate; scheme coefficients use "
                          "1/(1+lambda h), lambda h/(1+lambda h)");
    }
  }
  return res;
}

/// Nearest-node feedback trajectory from `start` with Euler steps `dt`.
/// `exited` marks a partial result when the path leaves the grid box.
inline Trajectory synthesize_trajectory(const GameProblem& problem,
                                        const FeedbackField& feedback, const Point& start,
                                        double horizon, double dt) {
  if (!feedback.grid.contains(start)) {
    throw OutOfDomainError("trajectory start lies outside the grid box");
  }
  const std::array<FeedbackFn, 2> fb{
      [&](const Point& p) { return feedback.at(p)[0]; },
      [&](const Point& p) { return feedback.at(p)[1]; }};
  return integrate_feedback(problem, start, fb, horizon, dt, &feedback.grid);
}

}  // namespace nashsl
