#pragma once

// Plain-text value field files.
//
// One row per node in node order: the node coordinates followed by U1 and
// U2. Lines starting with '#' are headers/comments.
//
//   # axes: x y
//   # columns: x y U1 U2
//   -2 -2 150 150
//   ...

#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nashsl/error.hpp"
#include "nashsl/grid.hpp"

namespace nashsl {

using FieldPair = std::array<ValueField, 2>;

inline const char* axis_name(std::size_t d) { return d == 0 ? "x" : "y"; }

inline void write_field_pair(std::ostream& os, const FieldPair& fields,
                             const std::string& title = {}) {
  const GridSpec& g = fields[0].grid;
  if (!title.empty()) os << "# " << title << '\n';
  os << "# axes:";
  for (std::size_t d = 0; d < g.dim(); ++d) os << ' ' << axis_name(d);
  os << "\n# columns:";
  for (std::size_t d = 0; d < g.dim(); ++d) os << ' ' << axis_name(d);
  os << " U1 U2\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Point p = g.node_coords(j);
    for (std::size_t d = 0; d < g.dim(); ++d) os << p[d] << ' ';
    os << fields[0][j] << ' ' << fields[1][j] << '\n';
  }
}

inline FieldPair read_field_pair(std::istream& is, const GridSpec& grid) {
  FieldPair out{ValueField(grid), ValueField(grid)};
  std::string line;
  std::size_t j = 0;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    std::vector<double> cols;
    double v;
    while (row >> v) cols.push_back(v);
    if (cols.size() != grid.dim() + 2) {
      throw ConfigError("field file line " + std::to_string(line_no) + ": expected " +
                        std::to_string(grid.dim() + 2) + " columns");
    }
    if (j >= grid.size()) throw ConfigError("field file has more rows than grid nodes");
    const Point p = grid.node_coords(j);
    for (std::size_t d = 0; d < grid.dim(); ++d) {
      if (std::abs(cols[d] - p[d]) > 1e-9 * (1.0 + std::abs(p[d]))) {
        throw ConfigError("field file line " + std::to_string(line_no) +
                          ": coordinates do not match the grid");
      }
    }
    out[0][j] = cols[grid.dim()];
    out[1][j] = cols[grid.dim() + 1];
    ++j;
  }
  if (j != grid.size()) {
    throw ConfigError("field file has " + std::to_string(j) + " rows, grid has " +
                      std::to_string(grid.size()) + " nodes");
  }
  return out;
}

inline FieldPair read_field_pair(const std::string& path, const GridSpec& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field file '" + path + "'");
  return read_field_pair(in, grid);
}

}  // namespace nashsl
