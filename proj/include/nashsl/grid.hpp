#pragma once

// Uniform tensor grids over a box in one or two dimensions, with
// multilinear interpolation stencils.
//
// Node layout is lexicographic with axis 0 running fastest:
//   j = i_0 + n_0 * i_1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nashsl/error.hpp"

namespace nashsl {

inline constexpr std::size_t kMaxDim = 2;
inline constexpr std::size_t kMaxStencil = std::size_t{1} << kMaxDim;

/// A point of the state space. Components beyond the grid dimension are 0.
using Point = std::array<double, kMaxDim>;

using NodeIndex = std::array<std::size_t, kMaxDim>;

class GridSpec {
 public:
  GridSpec() = default;

  GridSpec(std::size_t dim, Point lower, Point upper,
           std::array<std::size_t, kMaxDim> nodes_per_axis)
      : dim_(dim), lower_(lower), upper_(upper), nodes_(nodes_per_axis) {
    if (dim_ < 1 || dim_ > kMaxDim) {
      throw ConfigError("grid dimension must be 1 or 2, got " +
                        std::to_string(dim_));
    }
    size_ = 1;
    for (std::size_t d = 0; d < kMaxDim; ++d) {
      if (d >= dim_) {
        lower_[d] = upper_[d] = 0.0;
        nodes_[d] = 1;
        dx_[d] = 0.0;
        continue;
      }
      if (!(lower_[d] < upper_[d]) || !std::isfinite(lower_[d]) ||
          !std::isfinite(upper_[d])) {
        throw ConfigError("grid axis " + std::to_string(d) +
                          ": lower bound must be below upper bound");
      }
      if (nodes_[d] < 2) {
        throw ConfigError("grid axis " + std::to_string(d) +
                          ": need at least 2 nodes");
      }
      dx_[d] = (upper_[d] - lower_[d]) / static_cast<double>(nodes_[d] - 1);
      size_ *= nodes_[d];
    }
  }

  /// 1D convenience constructor.
  static GridSpec line(double lower, double upper, std::size_t nodes) {
    return GridSpec(1, {lower, 0.0}, {upper, 0.0}, {nodes, 1});
  }

  /// Square 2D grid [lower, upper]^2 with `nodes` nodes per axis.
  static GridSpec square(double lower, double upper, std::size_t nodes) {
    return GridSpec(2, {lower, lower}, {upper, upper}, {nodes, nodes});
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return size_; }
  const Point& lower() const noexcept { return lower_; }
  const Point& upper() const noexcept { return upper_; }
  const std::array<std::size_t, kMaxDim>& nodes_per_axis() const noexcept {
    return nodes_;
  }
  std::size_t nodes(std::size_t axis) const { return nodes_.at(axis); }
  double dx(std::size_t axis) const { return dx_.at(axis); }

  double min_dx() const noexcept {
    double m = dx_[0];
    for (std::size_t d = 1; d < dim_; ++d) m = std::min(m, dx_[d]);
    return m;
  }

  std::size_t stride(std::size_t axis) const noexcept {
    std::size_t s = 1;
    for (std::size_t d = 0; d < axis; ++d) s *= nodes_[d];
    return s;
  }

  NodeIndex multi_index(std::size_t j) const {
    if (j >= size_) {
      throw OutOfDomainError("node index " + std::to_string(j) +
                             " out of range [0, " + std::to_string(size_) +
                             ")");
    }
    NodeIndex idx{};
    for (std::size_t d = 0; d < dim_; ++d) {
      idx[d] = j % nodes_[d];
      j /= nodes_[d];
    }
    return idx;
  }

  std::size_t linear_index(const NodeIndex& idx) const {
    std::size_t j = 0;
    std::size_t s = 1;
    for (std::size_t d = 0; d < dim_; ++d) {
      if (idx[d] >= nodes_[d]) {
        throw OutOfDomainError("node multi-index out of range on axis " +
                               std::to_string(d));
      }
      j += idx[d] * s;
      s *= nodes_[d];
    }
    return j;
  }

  /// Coordinate of grid line `i` on `axis`. Computed as
  /// lower + i*(upper-lower)/(n-1) so symmetric grids hit 0 exactly.
  double coordinate(std::size_t axis, std::size_t i) const {
    return lower_[axis] + static_cast<double>(i) * (upper_[axis] - lower_[axis]) /
                              static_cast<double>(nodes_[axis] - 1);
  }

  Point node_coords(std::size_t j) const {
    const NodeIndex idx = multi_index(j);
    Point p{};
    for (std::size_t d = 0; d < dim_; ++d) p[d] = coordinate(d, idx[d]);
    return p;
  }

  bool is_boundary(std::size_t j) const {
    const NodeIndex idx = multi_index(j);
    for (std::size_t d = 0; d < dim_; ++d) {
      if (idx[d] == 0 || idx[d] + 1 == nodes_[d]) return true;
    }
    return false;
  }

  bool contains(const Point& p, double slack = 0.0) const noexcept {
    for (std::size_t d = 0; d < dim_; ++d) {
      const double tol = slack * dx_[d];
      if (!(p[d] >= lower_[d] - tol && p[d] <= upper_[d] + tol)) return false;
    }
    return true;
  }

  Point clamp(Point p) const noexcept {
    for (std::size_t d = 0; d < dim_; ++d) {
      p[d] = std::clamp(p[d], lower_[d], upper_[d]);
    }
    return p;
  }

  /// Node closest to `p` (p is clamped into the box first).
  std::size_t nearest_node(const Point& p) const {
    NodeIndex idx{};
    const Point q = clamp(p);
    for (std::size_t d = 0; d < dim_; ++d) {
      const double s = (q[d] - lower_[d]) / dx_[d];
      idx[d] = std::min<std::size_t>(
          static_cast<std::size_t>(std::lround(s)), nodes_[d] - 1);
    }
    return linear_index(idx);
  }

  /// Nodes within one grid step of `j` on every axis (3^dim block clipped
  /// to the grid), in ascending index order.
  std::vector<std::size_t> neighborhood(std::size_t j) const {
    const NodeIndex c = multi_index(j);
    std::array<std::size_t, kMaxDim> lo{}, hi{};
    for (std::size_t d = 0; d < kMaxDim; ++d) {
      if (d < dim_) {
        lo[d] = c[d] == 0 ? 0 : c[d] - 1;
        hi[d] = std::min(c[d] + 1, nodes_[d] - 1);
      }
    }
    std::vector<std::size_t> out;
    for (std::size_t i1 = lo[1]; i1 <= hi[1]; ++i1) {
      for (std::size_t i0 = lo[0]; i0 <= hi[0]; ++i0) {
        out.push_back(linear_index({i0, i1}));
      }
    }
    return out;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  std::size_t dim_ = 1;
  Point lower_{};
  Point upper_{};
  std::array<std::size_t, kMaxDim> nodes_{2, 1};
  Point dx_{};
  std::size_t size_ = 0;
};

/// One row of the interpolation matrix: the 2^dim vertices of the cell
/// containing a point, with multilinear weights.
struct InterpStencil {
  std::array<std::size_t, kMaxStencil> node_indices{};
  std::array<double, kMaxStencil> weights{};
  std::size_t count = 0;

  std::span<const std::size_t> nodes() const noexcept {
    return {node_indices.data(), count};
  }
  std::span<const double> weight_span() const noexcept {
    return {weights.data(), count};
  }

  double apply(std::span<const double> values) const noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      acc += weights[k] * values[node_indices[k]];
    }
    return acc;
  }
};

/// Multilinear interpolation stencil of `z`. A point on a cell face belongs
/// to the lower-index cell. Rounding overshoot up to 1e-9 cell widths past
/// the box is tolerated and clamped.
inline InterpStencil interp_stencil(const GridSpec& grid, const Point& z) {
  if (!grid.contains(z, 1e-9)) {
    std::string msg = "point (";
    for (std::size_t d = 0; d < grid.dim(); ++d) {
      if (d) msg += ", ";
      msg += std::to_string(z[d]);
    }
    throw OutOfDomainError(msg + ") lies outside the grid box");
  }
  const std::size_t dim = grid.dim();
  std::array<std::size_t, kMaxDim> cell{};
  std::array<double, kMaxDim> frac{};
  for (std::size_t d = 0; d < dim; ++d) {
    const double s = (z[d] - grid.lower()[d]) / grid.dx(d);
    const double last = static_cast<double>(grid.nodes(d) - 2);
    const double c = std::clamp(std::ceil(s) - 1.0, 0.0, last);
    cell[d] = static_cast<std::size_t>(c);
    frac[d] = std::clamp(s - c, 0.0, 1.0);
  }

  InterpStencil st;
  st.count = std::size_t{1} << dim;
  for (std::size_t corner = 0; corner < st.count; ++corner) {
    NodeIndex idx{};
    double w = 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const bool upper = (corner >> d) & 1U;
      idx[d] = cell[d] + (upper ? 1 : 0);
      w *= upper ? frac[d] : 1.0 - frac[d];
    }
    st.node_indices[corner] = grid.linear_index(idx);
    st.weights[corner] = w;
  }
  return st;
}

/// Node values of one player's value function.
struct ValueField {
  GridSpec grid;
  std::vector<double> values;

  ValueField() = default;
  explicit ValueField(GridSpec g, double fill = 0.0)
      : grid(std::move(g)), values(grid.size(), fill) {}
  ValueField(GridSpec g, std::vector<double> v)
      : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) {
      throw ConfigError("value field has " + std::to_string(values.size()) +
                        " entries, grid has " + std::to_string(grid.size()) +
                        " nodes");
    }
  }

  /// Samples `fn` at every node.
  static ValueField sample(const GridSpec& g,
                           const std::function<double(const Point&)>& fn) {
    ValueField f(g);
    for (std::size_t j = 0; j < g.size(); ++j) f.values[j] = fn(g.node_coords(j));
    return f;
  }

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
  double& operator[](std::size_t j) { return values[j]; }

  bool all_finite() const noexcept {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
  }
};

inline double eval_field(const ValueField& field, const Point& z) {
  return interp_stencil(field.grid, z).apply(field.values);
}

/// Sup norm of the difference of two equally sized vectors.
inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double sup_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace nashsl
