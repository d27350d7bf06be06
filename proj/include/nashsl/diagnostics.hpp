#pragma once

// Analysis of the fixed-point operator F on the stacked vector
// U = (U1, U2) in R^{2N}: component evaluation, Jacobian norm estimates,
// one-component scans, scheme residuals and a 1D admissibility checker.
//
// Boundary components are Dirichlet data: F leaves them untouched and they
// are never rows of the Jacobian (but may be columns).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nashsl/builtins.hpp"
#include "nashsl/error.hpp"
#include "nashsl/grid.hpp"
#include "nashsl/solver.hpp"

namespace nashsl {

using StackedField = std::vector<double>;

inline StackedField stack(const FieldPair& f) {
  StackedField u;
  u.reserve(f[0].size() + f[1].size());
  u.insert(u.end(), f[0].values.begin(), f[0].values.end());
  u.insert(u.end(), f[1].values.begin(), f[1].values.end());
  return u;
}

inline FieldPair unstack(const GridSpec& grid, std::span<const double> u) {
  const std::size_t n = grid.size();
  if (u.size() != 2 * n) throw ConfigError("stacked field must have 2N entries");
  return {ValueField(grid, std::vector<double>(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(n))),
          ValueField(grid, std::vector<double>(u.begin() + static_cast<std::ptrdiff_t>(n), u.end()))};
}

/// Stacked index of (player, node); player is 0-based.
inline std::size_t stacked_index(const GridSpec& grid, std::size_t player, std::size_t node) {
  return player * grid.size() + node;
}

/// Per interior slot, the control pair index to freeze (i1 * n2 + i2).
using FrozenControls = std::vector<std::size_t>;

struct ComponentValue {
  double value = 0.0;
  bool found = true;
  /// Nash pair index used, or npos for boundary components.
  std::size_t pair = std::numeric_limits<std::size_t>::max();
};

/// F evaluated one component at a time on top of a tabulated scheme.
class FixedPointOperator {
 public:
  explicit FixedPointOperator(const Scheme& scheme, NoNashPolicy policy = NoNashPolicy::Halt)
      : scheme_(&scheme), policy_(policy) {}

  const Scheme& scheme() const noexcept { return *scheme_; }
  std::size_t size() const noexcept { return 2 * scheme_->grid().size(); }
  std::size_t nodes() const noexcept { return scheme_->grid().size(); }

  /// One full Jacobi sweep on the stacked vector.
  StackedField apply(std::span<const double> u) const {
    const FieldPair prev = unstack(scheme_->grid(), u);
    FieldPair next = prev;
    FeedbackField fb(*scheme_);
    sweep(*scheme_, prev, next, fb, policy_);
    return stack(next);
  }

  /// F_r(U). Without a Nash pair the component keeps U_r and `found` is
  /// false.
  ComponentValue component(std::size_t r, std::span<const double> u,
                           NashScratch& scratch) const {
    const std::size_t n = nodes();
    if (r >= 2 * n || u.size() != 2 * n) throw ConfigError("component index out of range");
    const std::size_t player = r / n;
    const std::size_t node = r % n;
    const std::size_t slot = scheme_->slot_of(node);
    if (slot == Scheme::kNoSlot) return {u[r], true};
    const auto u1 = u.subspan(0, n);
    const auto u2 = u.subspan(n, n);
    const NashSearchResult res = scheme_->search(slot, u1, u2, scratch);
    if (!res.found) return {u[r], false};
    const std::size_t pair = res.indices[0] * scheme_->n2() + res.indices[1];
    return {scheme_->q(player, slot, pair, player == 0 ? u1 : u2), true, pair};
  }

  ComponentValue component(std::size_t r, std::span<const double> u) const {
    NashScratch scratch;
    return component(r, u, scratch);
  }

  /// F_a(U)_r with the control pair frozen per node (no Nash search).
  double frozen_component(std::size_t r, std::span<const double> u,
                          const FrozenControls& frozen) const {
    const std::size_t n = nodes();
    const std::size_t player = r / n;
    const std::size_t slot = scheme_->slot_of(r % n);
    if (slot == Scheme::kNoSlot) return u[r];
    return scheme_->q(player, slot, frozen.at(slot), u.subspan(player * n, n));
  }

  StackedField apply_frozen(std::span<const double> u, const FrozenControls& frozen) const {
    StackedField out(u.begin(), u.end());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = frozen_component(r, u, frozen);
    return out;
  }

  /// Nash pair index of every interior slot at U (npos where none exists).
  FrozenControls nash_pairs(std::span<const double> u) const {
    const std::size_t n = nodes();
    FrozenControls pairs(scheme_->interior_nodes().size(),
                         std::numeric_limits<std::size_t>::max());
    NashScratch scratch;
    for (std::size_t s = 0; s < pairs.size(); ++s) {
      const auto res = scheme_->search(s, u.subspan(0, n), u.subspan(n, n), scratch);
      if (res.found) pairs[s] = res.indices[0] * scheme_->n2() + res.indices[1];
    }
    return pairs;
  }

 private:
  const Scheme* scheme_;
  NoNashPolicy policy_;
};

/// F(U) on the stacked vector (one Jacobi sweep).
inline StackedField apply_F(const Scheme& scheme, std::span<const double> u,
                            NoNashPolicy policy = NoNashPolicy::Halt) {
  return FixedPointOperator(scheme, policy).apply(u);
}

struct JacobianEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

struct JacobianEstimate {
  /// max_r sum_c |J_rc| over interior rows that were not flagged.
  double norm = 0.0;
  /// Same maximum including flagged rows.
  double norm_all_rows = 0.0;
  std::vector<double> row_sums;
  std::vector<unsigned char> flagged;
  std::size_t rows_evaluated = 0;
  std::size_t flagged_rows = 0;
  /// Entries estimated with a backward step because the forward step
  /// switched the Nash pair.
  std::size_t backward_entries = 0;
  std::vector<JacobianEntry> entries;
  double delta = 0.0;
  bool frozen = false;
};

inline double default_jacobian_delta(std::span<const double> u) {
  return 1e-6 * (1.0 + sup_norm(u));
}

/// Finite-difference estimate of J_F(U) restricted to stencil locality: row
/// r (interior node j, player p) is differenced only against columns of the
/// 3^dim neighborhood of j, in both player blocks.
///
/// Each entry uses a forward step delta. If that step changes the Nash pair
/// at the row's node, a backward step is tried; if both change it, or if the
/// estimate with delta/2 differs by more than 10%, the row is flagged as
/// crossing a control switch. With `frozen`, controls are held fixed and no
/// Nash search is done.
inline JacobianEstimate jacobian_inf_norm(const Scheme& scheme, std::span<const double> u,
                                          std::optional<double> delta = {},
                                          const FrozenControls* frozen = nullptr) {
  const FixedPointOperator op(scheme);
  const GridSpec& grid = scheme.grid();
  const std::size_t n = grid.size();
  if (u.size() != 2 * n) throw ConfigError("jacobian: stacked field must have 2N entries");

  JacobianEstimate est;
  est.delta = delta.value_or(default_jacobian_delta(u));
  est.frozen = frozen != nullptr;
  if (!(est.delta > 0.0)) throw ConfigError("jacobian: delta must be positive");
  est.row_sums.assign(2 * n, 0.0);
  est.flagged.assign(2 * n, 0);

  StackedField work(u.begin(), u.end());
  NashScratch scratch;
  auto eval = [&](std::size_t r) -> ComponentValue {
    if (frozen) return {op.frozen_component(r, work, *frozen), true, 0};
    return op.component(r, work, scratch);
  };

  for (std::size_t r = 0; r < 2 * n; ++r) {
    const std::size_t node = r % n;
    if (!scheme.is_interior(node)) continue;
    ++est.rows_evaluated;
    const ComponentValue base = eval(r);
    bool flag = !base.found;
    double sum = 0.0;
    for (std::size_t player = 0; player < 2 && !flag; ++player) {
      for (std::size_t nb : grid.neighborhood(node)) {
        const std::size_t c = player * n + nb;
        const double orig = work[c];
        auto diff = [&](double step, double& value) {
          work[c] = orig + step;
          const ComponentValue v = eval(r);
          work[c] = orig;
          value = (v.value - base.value) / step;
          return v.found && v.pair == base.pair;
        };
        double d1 = 0.0, d2 = 0.0;
        double step = est.delta;
        bool ok = diff(step, d1);
        if (!ok) {
          step = -est.delta;
          ok = diff(step, d1);
          if (ok) ++est.backward_entries;
        }
        if (!ok) {
          flag = true;
          break;
        }
        diff(0.5 * step, d2);
        const double scale = std::max(std::abs(d1), std::abs(d2));
        if (std::abs(d1 - d2) > 0.1 * scale) {
          flag = true;
          break;
        }
        if (d1 != 0.0) est.entries.push_back({r, c, d1});
        sum += std::abs(d1);
      }
    }
    est.row_sums[r] = sum;
    est.norm_all_rows = std::max(est.norm_all_rows, sum);
    if (flag) {
      est.flagged[r] = 1;
      ++est.flagged_rows;
    } else {
      est.norm = std::max(est.norm, sum);
    }
  }
  return est;
}

struct ComponentScan {
  std::size_t component_index = 0;
  std::vector<double> s_values;
  std::vector<double> F_values;
  std::vector<unsigned char> found;
  std::vector<double> detected_fixed_points;
  /// Midpoints of sample intervals classified as jumps.
  std::vector<double> detected_jumps;
  /// Largest |dF/ds| over intervals inside continuous pieces.
  double max_piece_slope = 0.0;
  std::size_t pieces = 0;
};

/// Evaluates F_{j0}(U with U_{j0} = s) on `samples` equispaced s in
/// [s_min, s_max], then detects jumps and fixed points.
///
/// An interval is a jump when |dF| exceeds 10x the change implied by the
/// larger slope of its neighbouring intervals. Fixed points are sign changes
/// of F(s) - s inside a continuous piece, located by linear interpolation.
inline ComponentScan scan_component(const Scheme& scheme, std::size_t j0,
                                    std::span<const double> u, double s_min, double s_max,
                                    std::size_t samples) {
  if (samples < 2) throw ConfigError("scan needs at least 2 samples");
  if (!(s_min < s_max)) throw ConfigError("scan range must satisfy s_min < s_max");
  const FixedPointOperator op(scheme, NoNashPolicy::FreezeAndFlag);
  if (j0 >= op.size()) throw ConfigError("scan component index out of range");

  ComponentScan scan;
  scan.component_index = j0;
  StackedField work(u.begin(), u.end());
  NashScratch scratch;
  const double ds = (s_max - s_min) / static_cast<double>(samples - 1);
  for (std::size_t k = 0; k < samples; ++k) {
    const double s = k + 1 == samples ? s_max : s_min + static_cast<double>(k) * ds;
    work[j0] = s;
    const ComponentValue v = op.component(j0, work, scratch);
    scan.s_values.push_back(s);
    scan.F_values.push_back(v.value);
    scan.found.push_back(v.found ? 1 : 0);
  }

  const auto& F = scan.F_values;
  const auto& S = scan.s_values;
  const std::size_t m = samples - 1;
  std::vector<double> slope(m);
  for (std::size_t k = 0; k < m; ++k) slope[k] = (F[k + 1] - F[k]) / (S[k + 1] - S[k]);

  std::vector<unsigned char> jump(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    double local = 0.0;
    if (k > 0) local = std::max(local, std::abs(slope[k - 1]));
    if (k + 1 < m) local = std::max(local, std::abs(slope[k + 1]));
    const double h = S[k + 1] - S[k];
    const double floor = 1e-12 * (1.0 + std::abs(F[k]) + std::abs(F[k + 1]));
    if (std::abs(F[k + 1] - F[k]) > 10.0 * local * h + floor) jump[k] = 1;
  }

  scan.pieces = 1;
  for (std::size_t k = 0; k < m; ++k) {
    if (jump[k]) {
      scan.detected_jumps.push_back(0.5 * (S[k] + S[k + 1]));
      ++scan.pieces;
      continue;
    }
    scan.max_piece_slope = std::max(scan.max_piece_slope, std::abs(slope[k]));
  }

  for (std::size_t k = 0; k < samples; ++k) {
    const double g = F[k] - S[k];
    if (g == 0.0) {
      scan.detected_fixed_points.push_back(S[k]);
      continue;
    }
    if (k + 1 < samples && !jump[k]) {
      const double g1 = F[k + 1] - S[k + 1];
      if (g * g1 < 0.0) {
        scan.detected_fixed_points.push_back(S[k] + (S[k + 1] - S[k]) * g / (g - g1));
      }
    }
  }
  return scan;
}

struct SchemeResidual {
  std::array<double, 2> sup{};
  std::size_t nodes_without_nash = 0;
};

/// ||U_i - F(U)_i||_inf over interior nodes that have a Nash pair.
inline SchemeResidual scheme_residual(const Scheme& scheme, const FieldPair& fields) {
  const StackedField u = stack(fields);
  if (u.size() != 2 * scheme.grid().size()) throw ConfigError("residual: fields do not match grid");
  const FixedPointOperator op(scheme);
  const std::size_t n = scheme.grid().size();
  SchemeResidual res;
  NashScratch scratch;
  for (std::size_t j : scheme.interior_nodes()) {
    bool missing = false;
    for (std::size_t p = 0; p < 2; ++p) {
      const ComponentValue v = op.component(p * n + j, u, scratch);
      if (!v.found) {
        missing = true;
        break;
      }
      res.sup[p] = std::max(res.sup[p], std::abs(u[p * n + j] - v.value));
    }
    if (missing) ++res.nodes_without_nash;
  }
  return res;
}

inline SchemeResidual scheme_residual(const FieldPair& fields, const GameProblem& problem,
                                      const GridSpec& grid, const ControlGrid& controls,
                                      double h) {
  return scheme_residual(Scheme(problem, grid, controls, h), fields);
}

enum class Verdict { AdmissibleOnGrid, NotAdmissible, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::AdmissibleOnGrid: return "admissible-on-grid";
    case Verdict::NotAdmissible: return "not-admissible";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct A3Violation {
  std::size_t node = 0;
  double x = 0.0;
  double left_sum = 0.0;   // u1'(x-) + u2'(x-)
  double right_sum = 0.0;  // u1'(x+) + u2'(x+)
};

struct AdmissibilityReport {
  /// sup |lambda_i u_i - H_i| away from kinks; NaN without a Hamiltonian.
  double a1_residual_sup = std::numeric_limits<double>::quiet_NaN();
  bool a1_checked = false;
  bool a1_ok = false;
  /// Smallest C with |u(x_j)| <= C (1 + |x_j|) on the whole grid.
  double a2_growth_constant = 0.0;
  /// Same constant restricted to the central half of the domain.
  double a2_growth_constant_half = 0.0;
  /// The growth constant increases markedly with the domain size.
  bool a2_violation = false;
  std::vector<std::size_t> kinks;
  std::vector<A3Violation> a3_violations;
  double jump_tol = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<std::string> notes;
};

struct AdmissibilityOptions {
  double residual_tol = 1e-6;
  /// <= 0 selects 10 dx times the mean |u''| estimated by second differences.
  double jump_tol = 0.0;
  std::array<double, 2> discounts{1.0, 1.0};
  /// A2 is flagged when C(full domain) / C(central half) exceeds this ratio.
  double growth_ratio = 1.5;
};

/// Checks a 1D field pair against the admissible-solution conditions:
/// (A1) the HJ system holds away from kinks (central differences),
/// (A2) growth bounded by C(1+|x|), only estimable on a bounded domain,
/// (A3) at derivative jumps, u1'+u2' >= 0 on the left or <= 0 on the right.
inline AdmissibilityReport check_admissibility_1d(
    const FieldPair& fields, const AdmissibilityOptions& opt = {},
    const std::optional<Hamiltonian1D>& hamiltonian = std::nullopt) {
  const GridSpec& grid = fields[0].grid;
  if (grid.dim() != 1) throw ConfigError("admissibility check requires a 1D grid");
  const std::size_t n = grid.size();
  if (n < 3) throw ConfigError("admissibility check needs at least 3 nodes");
  const double dx = grid.dx(0);
  const auto& u1 = fields[0].values;
  const auto& u2 = fields[1].values;

  AdmissibilityReport rep;
  auto left = [&](const std::vector<double>& u, std::size_t j) { return (u[j] - u[j - 1]) / dx; };
  auto right = [&](const std::vector<double>& u, std::size_t j) { return (u[j + 1] - u[j]) / dx; };

  double jump_tol = opt.jump_tol;
  if (!(jump_tol > 0.0)) {
    double curv = 0.0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      for (const auto* u : {&u1, &u2}) {
        curv += std::abs((*u)[j + 1] - 2.0 * (*u)[j] + (*u)[j - 1]) / (dx * dx);
      }
    }
    curv /= static_cast<double>(2 * (n - 2));
    double slope_scale = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      slope_scale = std::max({slope_scale, std::abs(right(u1, j)), std::abs(right(u2, j))});
    }
    jump_tol = std::max(10.0 * dx * curv, 1e-8 * (1.0 + slope_scale));
  }
  rep.jump_tol = jump_tol;

  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double j1 = right(u1, j) - left(u1, j);
    const double j2 = right(u2, j) - left(u2, j);
    if (std::abs(j1) <= jump_tol && std::abs(j2) <= jump_tol) continue;
    rep.kinks.push_back(j);
    const double ls = left(u1, j) + left(u2, j);
    const double rs = right(u1, j) + right(u2, j);
    if (!(ls >= 0.0) && !(rs <= 0.0)) {
      rep.a3_violations.push_back({j, grid.node_coords(j)[0], ls, rs});
    }
  }

  if (hamiltonian) {
    rep.a1_checked = true;
    double sup = 0.0;
    std::size_t k = 0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      if (k < rep.kinks.size() && rep.kinks[k] == j) {
        ++k;
        continue;
      }
      const double x = grid.node_coords(j)[0];
      const double p1 = 0.5 * (left(u1, j) + right(u1, j));
      const double p2 = 0.5 * (left(u2, j) + right(u2, j));
      const auto H = (*hamiltonian)(x, p1, p2);
      sup = std::max({sup, std::abs(opt.discounts[0] * u1[j] - H[0]),
                      std::abs(opt.discounts[1] * u2[j] - H[1])});
    }
    rep.a1_residual_sup = sup;
    rep.a1_ok = sup <= opt.residual_tol;
  } else {
    rep.notes.push_back("A1 not checked: no Hamiltonian supplied");
  }

  const double center = 0.5 * (grid.lower()[0] + grid.upper()[0]);
  const double half_width = 0.25 * (grid.upper()[0] - grid.lower()[0]);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = grid.node_coords(j)[0];
    const double c = std::max(std::abs(u1[j]), std::abs(u2[j])) / (1.0 + std::abs(x));
    rep.a2_growth_constant = std::max(rep.a2_growth_constant, c);
    if (std::abs(x - center) <= half_width) {
      rep.a2_growth_constant_half = std::max(rep.a2_growth_constant_half, c);
    }
  }
  const double c_half = rep.a2_growth_constant_half;
  rep.a2_violation = rep.a2_growth_constant > opt.growth_ratio * c_half &&
                     rep.a2_growth_constant > 1e-12;
  rep.notes.push_back("A2 holds only at infinity; a bounded grid can refute but not certify it");

  if (!rep.a3_violations.empty() || rep.a2_violation || (rep.a1_checked && !rep.a1_ok)) {
    rep.verdict = Verdict::NotAdmissible;
  } else if (rep.a1_checked) {
    rep.verdict = Verdict::AdmissibleOnGrid;
  } else {
    rep.verdict = Verdict::Inconclusive;
  }
  return rep;
}

}  // namespace nashsl
