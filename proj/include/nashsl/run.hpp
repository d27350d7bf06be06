#pragma once

// Batch runs: manifests, artifact files and the run report.
//
// A manifest is a flat key = value file; '#' starts a comment and repeated
// keys (scan_node, jacobian_at) accumulate. Settings resolve in this order,
// later winning: builtin defaults, manifest file, command-line flags.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nashsl/builtins.hpp"
#include "nashsl/diagnostics.hpp"
#include "nashsl/error.hpp"
#include "nashsl/field_io.hpp"
#include "nashsl/solver.hpp"

namespace nashsl {

struct RunManifest {
  ProblemParams problem;
  std::optional<double> epsilon1;
  std::optional<double> epsilon2;
  std::optional<int> max_iterations;
  /// constant:C | exact[:name] | perturbed[:name]:amplitude | file:path
  std::optional<std::string> initial_guess;
  /// A number (both players), "a,b" (per player) or exact[:name].
  std::optional<std::string> boundary_value;
  /// halt | freeze
  std::optional<std::string> on_no_nash;
  std::optional<double> time_step;
  std::optional<double> f_norm_safety;
  /// Offsets from the node nearest the origin, optional ":player" suffix.
  std::vector<std::string> scan_nodes;
  std::size_t scan_samples = 4001;
  /// Half width of the scan interval around the current value; defaults to
  /// 0.005 (1 + |U_j0|).
  std::optional<double> scan_half_width;
  /// initial | final | iteration:k
  std::vector<std::string> jacobian_at;
  std::string output_dir = "nashsl-out";
  std::uint64_t seed = 0;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return i;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  const long long i = to_integer(key, v);
  if (i < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(i);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

/// Applies one manifest entry. Unknown keys are configuration errors.
inline void set_manifest_key(RunManifest& m, const std::string& key, const std::string& value) {
  using detail::to_count;
  using detail::to_double;
  ProblemParams& p = m.problem;
  if (key == "problem") p.name = value;
  else if (key == "k1") p.k1 = to_double(key, value);
  else if (key == "k2") p.k2 = to_double(key, value);
  else if (key == "delta") p.delta = to_double(key, value);
  else if (key == "domain_lower") p.domain_lower = to_double(key, value);
  else if (key == "domain_upper") p.domain_upper = to_double(key, value);
  else if (key == "grid_nodes") p.grid_nodes = to_count(key, value);
  else if (key == "control_lower") p.control_lower = to_double(key, value);
  else if (key == "control_upper") p.control_upper = to_double(key, value);
  else if (key == "controls_per_player") p.controls_per_player = to_count(key, value);
  else if (key == "discount1") p.discount1 = to_double(key, value);
  else if (key == "discount2") p.discount2 = to_double(key, value);
  else if (key == "epsilon1") m.epsilon1 = to_double(key, value);
  else if (key == "epsilon2") m.epsilon2 = to_double(key, value);
  else if (key == "max_iterations") m.max_iterations = static_cast<int>(detail::to_integer(key, value));
  else if (key == "initial_guess") m.initial_guess = value;
  else if (key == "boundary_value") m.boundary_value = value;
  else if (key == "on_no_nash") m.on_no_nash = value;
  else if (key == "time_step") m.time_step = to_double(key, value);
  else if (key == "f_norm_safety") m.f_norm_safety = to_double(key, value);
  else if (key == "scan_node") m.scan_nodes.push_back(value);
  else if (key == "scan_samples") m.scan_samples = to_count(key, value);
  else if (key == "scan_half_width") m.scan_half_width = to_double(key, value);
  else if (key == "jacobian_at") m.jacobian_at.push_back(value);
  else if (key == "output_dir") m.output_dir = value;
  else if (key == "seed") m.seed = static_cast<std::uint64_t>(detail::to_integer(key, value));
  else throw ConfigError("unknown manifest key '" + key + "'");
}

inline RunManifest parse_manifest(std::istream& is, RunManifest m = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": expected key = value");
    }
    set_manifest_key(m, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return m;
}

inline RunManifest load_manifest(const std::string& path, RunManifest m = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path + "'");
  return parse_manifest(in, std::move(m));
}

/// Writes every set field; parse_manifest(write_manifest(m)) == m.
inline void write_manifest(std::ostream& os, const RunManifest& m) {
  using detail::fmt;
  const ProblemParams& p = m.problem;
  auto opt = [&](const char* key, const auto& v) {
    if (v) os << key << " = " << fmt(static_cast<double>(*v)) << '\n';
  };
  os << "problem = " << p.name << '\n';
  opt("k1", p.k1);
  opt("k2", p.k2);
  opt("delta", p.delta);
  opt("domain_lower", p.domain_lower);
  opt("domain_upper", p.domain_upper);
  if (p.grid_nodes) os << "grid_nodes = " << *p.grid_nodes << '\n';
  opt("control_lower", p.control_lower);
  opt("control_upper", p.control_upper);
  if (p.controls_per_player) os << "controls_per_player = " << *p.controls_per_player << '\n';
  opt("discount1", p.discount1);
  opt("discount2", p.discount2);
  opt("epsilon1", m.epsilon1);
  opt("epsilon2", m.epsilon2);
  if (m.max_iterations) os << "max_iterations = " << *m.max_iterations << '\n';
  if (m.initial_guess) os << "initial_guess = " << *m.initial_guess << '\n';
  if (m.boundary_value) os << "boundary_value = " << *m.boundary_value << '\n';
  if (m.on_no_nash) os << "on_no_nash = " << *m.on_no_nash << '\n';
  opt("time_step", m.time_step);
  opt("f_norm_safety", m.f_norm_safety);
  for (const auto& s : m.scan_nodes) os << "scan_node = " << s << '\n';
  os << "scan_samples = " << m.scan_samples << '\n';
  opt("scan_half_width", m.scan_half_width);
  for (const auto& s : m.jacobian_at) os << "jacobian_at = " << s << '\n';
  os << "output_dir = " << m.output_dir << '\n';
  os << "seed = " << m.seed << '\n';
}

inline NoNashPolicy parse_policy(const std::string& s) {
  if (s == "halt") return NoNashPolicy::Halt;
  if (s == "freeze" || s == "freeze-and-flag") return NoNashPolicy::FreezeAndFlag;
  throw ConfigError("on_no_nash must be 'halt' or 'freeze', got '" + s + "'");
}

inline InitialGuess parse_initial_guess(const std::string& text, std::uint64_t seed,
                                        std::span<const ReferenceSolution> refs) {
  InitialGuess g;
  g.seed = seed;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto default_ref = [&]() -> std::string {
    if (refs.empty()) throw ConfigError("initial guess '" + text + "': problem has no reference solution");
    return refs.front().name;
  };
  if (kind == "constant") {
    g.kind = GuessKind::Constant;
    g.constant = detail::to_double("initial_guess", rest);
  } else if (kind == "exact") {
    g.kind = GuessKind::Exact;
    g.solution = rest.empty() ? default_ref() : rest;
  } else if (kind == "perturbed") {
    g.kind = GuessKind::PerturbedExact;
    const auto parts = detail::split(rest, ':');
    if (parts.size() == 1) {
      g.solution = default_ref();
      g.amplitude = detail::to_double("initial_guess", parts[0]);
    } else if (parts.size() == 2) {
      g.solution = parts[0];
      g.amplitude = detail::to_double("initial_guess", parts[1]);
    } else {
      throw ConfigError("initial guess: expected perturbed[:name]:amplitude");
    }
  } else if (kind == "file") {
    if (rest.empty()) throw ConfigError("initial guess: file: needs a path");
    g.kind = GuessKind::FromFile;
    g.path = rest;
  } else if (colon == std::string::npos) {
    g.kind = GuessKind::Constant;
    g.constant = detail::to_double("initial_guess", text);
  } else {
    throw ConfigError("unknown initial guess '" + text + "'");
  }
  if (g.kind == GuessKind::Exact || g.kind == GuessKind::PerturbedExact) find_reference(refs, g.solution);
  return g;
}

inline BoundaryCondition parse_boundary_value(const std::string& text,
                                              std::span<const ReferenceSolution> refs) {
  BoundaryCondition bc;
  if (text.rfind("exact", 0) == 0) {
    bc.kind = BoundaryKind::Exact;
    if (text.size() > 5) {
      if (text[5] != ':') throw ConfigError("boundary value: expected exact[:name]");
      bc.solution = text.substr(6);
    } else {
      if (refs.empty()) throw ConfigError("boundary value 'exact': problem has no reference solution");
      bc.solution = refs.front().name;
    }
    find_reference(refs, bc.solution);
    return bc;
  }
  const auto parts = detail::split(text, ',');
  bc.kind = BoundaryKind::Constant;
  if (parts.size() == 1) {
    const double v = detail::to_double("boundary_value", parts[0]);
    bc.values = {v, v};
  } else if (parts.size() == 2) {
    bc.values = {detail::to_double("boundary_value", parts[0]),
                 detail::to_double("boundary_value", parts[1])};
  } else {
    throw ConfigError("boundary value: expected a number, 'a,b' or exact[:name]");
  }
  return bc;
}

/// Builtin setup with every manifest override applied.
inline ProblemSetup resolve_setup(const RunManifest& m) {
  if (m.problem.name.empty()) throw ConfigError("no problem selected");
  ProblemSetup s = builtin_problem(m.problem);
  SolverConfig& c = s.config;
  if (m.epsilon1) c.tolerances[0] = *m.epsilon1;
  if (m.epsilon2) c.tolerances[1] = *m.epsilon2;
  if (m.max_iterations) c.max_iterations = *m.max_iterations;
  if (m.initial_guess) c.initial_guess = parse_initial_guess(*m.initial_guess, m.seed, s.references);
  c.initial_guess.seed = m.seed;
  if (m.boundary_value) c.boundary = parse_boundary_value(*m.boundary_value, s.references);
  if (m.on_no_nash) c.on_no_nash = parse_policy(*m.on_no_nash);
  if (m.time_step) c.time_step_override = *m.time_step;
  if (m.f_norm_safety) c.f_norm_safety = *m.f_norm_safety;
  c.validate();
  return s;
}

struct ScanRequest {
  std::string text;
  std::vector<long long> offsets;
  std::size_t player = 0;  // 0-based
};

inline ScanRequest parse_scan_node(const std::string& text, std::size_t dim) {
  ScanRequest r;
  r.text = text;
  std::string coords = text;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    const long long p = detail::to_integer("scan_node", text.substr(colon + 1));
    if (p != 1 && p != 2) throw ConfigError("scan node player must be 1 or 2");
    r.player = static_cast<std::size_t>(p - 1);
    coords = text.substr(0, colon);
  }
  for (const auto& part : detail::split(coords, ',')) {
    r.offsets.push_back(detail::to_integer("scan_node", part));
  }
  if (r.offsets.size() != dim) {
    throw ConfigError("scan node '" + text + "' needs " + std::to_string(dim) + " offsets");
  }
  return r;
}

/// Stacked component index of a scan request.
inline std::size_t scan_component_index(const GridSpec& grid, const ScanRequest& r) {
  const NodeIndex origin = grid.multi_index(grid.nearest_node(grid.clamp(Point{0.0, 0.0})));
  NodeIndex idx{};
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    const long long i = static_cast<long long>(origin[d]) + r.offsets[d];
    if (i < 0 || i >= static_cast<long long>(grid.nodes(d))) {
      throw ConfigError("scan node '" + r.text + "' lies outside the grid");
    }
    idx[d] = static_cast<std::size_t>(i);
  }
  return stacked_index(grid, r.player, grid.linear_index(idx));
}

struct JacobianRequest {
  enum class When { Initial, Final, Iteration };
  When when = When::Final;
  int iteration = 0;
  std::string text;
};

inline JacobianRequest parse_jacobian_at(const std::string& text) {
  JacobianRequest r;
  r.text = text;
  if (text == "initial") {
    r.when = JacobianRequest::When::Initial;
  } else if (text == "final") {
    r.when = JacobianRequest::When::Final;
  } else if (text.rfind("iteration:", 0) == 0) {
    r.when = JacobianRequest::When::Iteration;
    r.iteration = static_cast<int>(detail::to_integer("jacobian_at", text.substr(10)));
    if (r.iteration < 0) throw ConfigError("jacobian_at iteration must be non-negative");
    if (r.iteration == 0) r.when = JacobianRequest::When::Initial;
  } else {
    throw ConfigError("jacobian_at must be initial, final or iteration:k");
  }
  return r;
}

struct ErrorTable {
  std::string reference;
  std::vector<std::array<double, 2>> errors;  // U_i(x_j) - u_i(x_j)
  std::array<double, 2> sup{};
  std::array<double, 2> mean_abs{};
};

/// Per-node errors against the problem's exact solution; the summaries
/// cover interior nodes.
inline ErrorTable compare_exact(const FieldPair& fields, const ProblemSetup& setup) {
  if (!setup.has_exact_solution || setup.references.empty()) {
    throw ConfigError("problem '" + setup.params.name + "' has no exact solution registered");
  }
  const ReferenceSolution& ref = setup.references.front();
  const FieldPair exact = project(fields[0].grid, ref);
  ErrorTable t;
  t.reference = ref.name;
  const GridSpec& g = fields[0].grid;
  const std::size_t n = fields[0].size();
  std::size_t interior = 0;
  for (std::size_t j = 0; j < n; ++j) interior += g.is_boundary(j) ? 0 : 1;
  t.errors.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < 2; ++p) {
      const double e = fields[p][j] - exact[p][j];
      t.errors[j][p] = e;
      // Boundary nodes carry Dirichlet data, not computed values.
      if (g.is_boundary(j)) continue;
      t.sup[p] = std::max(t.sup[p], std::abs(e));
      t.mean_abs[p] += std::abs(e) / static_cast<double>(interior);
    }
  }
  return t;
}

inline int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return 0;
    case SolveStatus::MaxIterations: return 2;
    case SolveStatus::Halted: return 3;
  }
  return 1;
}

struct ScanOutput {
  ScanRequest request;
  ComponentScan scan;
  std::string file;
};

struct JacobianOutput {
  JacobianRequest request;
  std::optional<JacobianEstimate> estimate;
  std::string file;
  std::string note;
};

struct RunOutcome {
  int exit_code = 0;
  ProblemSetup setup;
  SolveResult result;
  std::vector<ScanOutput> scans;
  std::vector<JacobianOutput> jacobians;
  std::optional<ErrorTable> errors;
  std::optional<AdmissibilityReport> admissibility;
  std::vector<std::string> files;
  nlohmann::ordered_json report;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

inline std::string scan_label(const ScanRequest& r) {
  std::string s = "p" + std::to_string(r.player + 1);
  for (long long o : r.offsets) s += "_" + (o < 0 ? "m" + std::to_string(-o) : std::to_string(o));
  return s;
}

inline const char* to_string(FeedbackStatus s) {
  switch (s) {
    case FeedbackStatus::Boundary: return "boundary";
    case FeedbackStatus::Found: return "nash";
    case FeedbackStatus::NoNash: return "no-nash";
  }
  return "?";
}

inline void write_coords(std::ostream& os, const GridSpec& g, std::size_t j) {
  const Point p = g.node_coords(j);
  for (std::size_t d = 0; d < g.dim(); ++d) os << p[d] << ' ';
}

inline void write_columns_header(std::ostream& os, const GridSpec& g, const std::string& rest) {
  os << "# axes:";
  for (std::size_t d = 0; d < g.dim(); ++d) os << ' ' << axis_name(d);
  os << "\n# columns:";
  for (std::size_t d = 0; d < g.dim(); ++d) os << ' ' << axis_name(d);
  os << ' ' << rest << '\n';
}

}  // namespace detail

/// Solves the manifest's problem, runs the requested diagnostics and writes
/// every artifact into `output_dir`. Configuration problems throw
/// ConfigError; the solve status is mapped to `exit_code`.
inline RunOutcome run(const RunManifest& m, std::ostream& log = std::clog) {
  namespace fs = std::filesystem;
  RunOutcome out;
  out.setup = resolve_setup(m);
  const ProblemSetup& s = out.setup;
  const SolverConfig& config = s.config;

  std::vector<ScanRequest> scan_requests;
  for (const auto& t : m.scan_nodes) scan_requests.push_back(parse_scan_node(t, s.grid.dim()));
  std::vector<JacobianRequest> jac_requests;
  for (const auto& t : m.jacobian_at) jac_requests.push_back(parse_jacobian_at(t));
  if (m.scan_samples < 2) throw ConfigError("scan_samples must be at least 2");
  for (const auto& r : scan_requests) scan_component_index(s.grid, r);

  const fs::path dir(m.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());

  const TimeStep ts = time_step(s.problem, s.grid, s.controls, config);
  const Scheme scheme(s.problem, s.grid, s.controls, ts.h);
  const FieldPair initial = make_initial_fields(s.grid, config, s.references);

  std::map<int, FieldPair> snapshots;
  for (const auto& r : jac_requests) {
    if (r.when == JacobianRequest::When::Iteration) snapshots.emplace(r.iteration, FieldPair{});
  }
  const IterationObserver observer = [&](int k, const FieldPair& f) {
    if (auto it = snapshots.find(k); it != snapshots.end()) it->second = f;
  };

  log << "solving " << s.params.name << ": " << s.grid.size() << " nodes, h = " << ts.h << '\n';
  out.result = solve(scheme, config, initial, observer);
  out.result.time_step = ts;
  SolveResult& res = out.result;
  out.exit_code = exit_code(res.status);
  log << "status " << to_string(res.status) << " after " << res.iterations << " iterations\n";

  auto record = [&](const fs::path& p) { out.files.push_back(p.filename().string()); };

  {
    const fs::path p = dir / "values.txt";
    auto f = detail::open_output(p);
    write_field_pair(f, res.fields, s.params.name + " value functions after " +
                                        std::to_string(res.iterations) + " iterations");
    record(p);
  }
  {
    const fs::path p = dir / "feedback.txt";
    auto f = detail::open_output(p);
    f << "# " << s.params.name << " feedback controls a*(x_j)\n";
    detail::write_columns_header(f, s.grid, "status a1 a2");
    for (std::size_t j = 0; j < s.grid.size(); ++j) {
      detail::write_coords(f, s.grid, j);
      f << detail::to_string(res.feedback.status[j]) << ' ' << res.feedback.controls[j][0] << ' '
        << res.feedback.controls[j][1] << '\n';
    }
    record(p);
  }
  {
    const fs::path p = dir / "convergence.txt";
    auto f = detail::open_output(p);
    f << "# columns: iteration increment1 increment2 nodes_without_nash oscillation wall_seconds\n";
    for (const auto& r : res.history) {
      f << r.iteration << ' ' << r.increments[0] << ' ' << r.increments[1] << ' '
        << r.nodes_without_nash << ' ' << (r.oscillation_detected ? 1 : 0) << ' '
        << r.wall_time.count() << '\n';
    }
    record(p);
  }

  const StackedField final_u = stack(res.fields);
  for (const auto& r : scan_requests) {
    ScanOutput so;
    so.request = r;
    const std::size_t j0 = scan_component_index(s.grid, r);
    const double centre = final_u[j0];
    const double w = m.scan_half_width.value_or(0.005 * (1.0 + std::abs(centre)));
    if (!(w > 0.0)) throw ConfigError("scan_half_width must be positive");
    so.scan = scan_component(scheme, j0, final_u, centre - w, centre + w, m.scan_samples);
    const fs::path p = dir / ("scan_" + detail::scan_label(r) + ".txt");
    auto f = detail::open_output(p);
    f << "# component " << j0 << " (player " << r.player + 1 << ", node offset " << r.text
      << "), current value " << centre << '\n';
    f << "# fixed points:";
    for (double x : so.scan.detected_fixed_points) f << ' ' << x;
    f << "\n# jumps:";
    for (double x : so.scan.detected_jumps) f << ' ' << x;
    f << "\n# columns: s F nash_found\n";
    for (std::size_t k = 0; k < so.scan.s_values.size(); ++k) {
      f << so.scan.s_values[k] << ' ' << so.scan.F_values[k] << ' '
        << static_cast<int>(so.scan.found[k]) << '\n';
    }
    so.file = p.filename().string();
    record(p);
    out.scans.push_back(std::move(so));
  }

  for (const auto& r : jac_requests) {
    JacobianOutput jo;
    jo.request = r;
    const FieldPair* at = nullptr;
    std::string label;
    switch (r.when) {
      case JacobianRequest::When::Initial: at = &initial; label = "initial"; break;
      case JacobianRequest::When::Final: at = &res.fields; label = "final"; break;
      case JacobianRequest::When::Iteration: {
        label = "iteration_" + std::to_string(r.iteration);
        const auto& snap = snapshots.at(r.iteration);
        if (snap[0].size() == s.grid.size()) at = &snap;
        break;
      }
    }
    if (!at) {
      jo.note = "iteration " + std::to_string(r.iteration) + " was not reached";
      out.jacobians.push_back(std::move(jo));
      continue;
    }
    jo.estimate = jacobian_inf_norm(scheme, stack(*at));
    const fs::path p = dir / ("jacobian_" + label + ".txt");
    auto f = detail::open_output(p);
    const JacobianEstimate& e = *jo.estimate;
    f << "# jacobian of F at " << label << ": norm " << e.norm << " (unflagged rows), "
      << e.flagged_rows << " flagged of " << e.rows_evaluated << ", delta " << e.delta << '\n';
    f << "# columns: row col value\n";
    for (const auto& t : e.entries) f << t.row << ' ' << t.col << ' ' << t.value << '\n';
    jo.file = p.filename().string();
    record(p);
    out.jacobians.push_back(std::move(jo));
  }

  if (s.has_exact_solution) {
    out.errors = compare_exact(res.fields, s);
    const fs::path p = dir / "compare_exact.txt";
    auto f = detail::open_output(p);
    const ErrorTable& t = *out.errors;
    f << "# error against '" << t.reference << "'\n";
    f << "# sup: " << t.sup[0] << ' ' << t.sup[1] << "\n# mean_abs: " << t.mean_abs[0] << ' '
      << t.mean_abs[1] << '\n';
    detail::write_columns_header(f, s.grid, "err1 err2");
    for (std::size_t j = 0; j < s.grid.size(); ++j) {
      detail::write_coords(f, s.grid, j);
      f << t.errors[j][0] << ' ' << t.errors[j][1] << '\n';
    }
    record(p);
  }

  if (s.grid.dim() == 1) {
    AdmissibilityOptions opt;
    opt.discounts = {s.problem.discounts[0], s.problem.discounts[1]};
    opt.residual_tol = std::max(1e-6, 10.0 * std::max(config.tolerances[0], config.tolerances[1]));
    out.admissibility = check_admissibility_1d(res.fields, opt, s.hamiltonian);
    const fs::path p = dir / "admissibility.txt";
    auto f = detail::open_output(p);
    const AdmissibilityReport& a = *out.admissibility;
    f << "verdict = " << to_string(a.verdict) << '\n';
    f << "a1_residual_sup = " << a.a1_residual_sup << '\n';
    f << "a2_growth_constant = " << a.a2_growth_constant << '\n';
    f << "a2_growth_constant_half_domain = " << a.a2_growth_constant_half << '\n';
    f << "a2_violation = " << (a.a2_violation ? "true" : "false") << '\n';
    f << "jump_tol = " << a.jump_tol << '\n';
    for (const auto& v : a.a3_violations) {
      f << "a3_violation = " << v.x << " left " << v.left_sum << " right " << v.right_sum << '\n';
    }
    for (const auto& n : a.notes) f << "note = " << n << '\n';
    record(p);
  }

  // Run report.
  using nlohmann::ordered_json;
  ordered_json& rep = out.report;
  std::ostringstream manifest_text;
  write_manifest(manifest_text, m);
  const ProblemParams& p = s.params;
  rep["problem"] = {{"name", p.name},
                    {"k1", *p.k1},
                    {"k2", *p.k2},
                    {"delta", *p.delta},
                    {"discounts", {*p.discount1, *p.discount2}}};
  rep["grid"] = {{"dim", s.grid.dim()},
                 {"lower", std::vector<double>(s.grid.lower().begin(), s.grid.lower().begin() + static_cast<std::ptrdiff_t>(s.grid.dim()))},
                 {"upper", std::vector<double>(s.grid.upper().begin(), s.grid.upper().begin() + static_cast<std::ptrdiff_t>(s.grid.dim()))},
                 {"nodes_per_axis", s.grid.nodes(0)},
                 {"dx", s.grid.dx(0)}};
  rep["controls"] = {{"player1", s.controls[0]}, {"player2", s.controls[1]}};
  rep["time_step"] = {{"h", ts.h},
                      {"f_inf_norm", ts.f_norm},
                      {"f_inf_norm_estimated", ts.f_norm_estimated},
                      {"overridden", ts.overridden},
                      {"f_norm_safety", config.f_norm_safety}};
  rep["solver"] = {{"tolerances", config.tolerances},
                   {"max_iterations", config.max_iterations},
                   {"on_no_nash", to_string(config.on_no_nash)},
                   {"initial_guess", m.initial_guess.value_or("builtin default")},
                   {"boundary_value", m.boundary_value.value_or("builtin default")},
                   {"oscillation_window", config.oscillation_window},
                   {"seed", m.seed}};
  ordered_json behaviour = {
      {"stabilized", res.count(NodeBehavior::Stabilized)},
      {"oscillating", res.count(NodeBehavior::Oscillating)},
      {"drifting", res.count(NodeBehavior::Drifting)},
      {"undetermined", res.count(NodeBehavior::Undetermined)}};
  rep["result"] = {{"status", to_string(res.status)},
                   {"exit_code", out.exit_code},
                   {"iterations", res.iterations},
                   {"final_increments", res.history.empty() ? std::array<double, 2>{}
                                                           : res.history.back().increments},
                   {"oscillation_detected",
                    !res.history.empty() && res.history.back().oscillation_detected},
                   {"behaviour", behaviour},
                   {"clamped_transitions", res.clamped_transitions},
                   {"max_abs", {sup_norm(res.fields[0].values), sup_norm(res.fields[1].values)}},
                   {"notes", res.notes}};
  if (res.halted_node) {
    rep["result"]["halted_node"] = *res.halted_node;
    rep["result"]["halted_at"] = s.grid.node_coords(*res.halted_node);
  }
  ordered_json scans = ordered_json::array();
  for (const auto& so : out.scans) {
    scans.push_back({{"node", so.request.text},
                     {"component", so.scan.component_index},
                     {"fixed_points", so.scan.detected_fixed_points},
                     {"jumps", so.scan.detected_jumps},
                     {"pieces", so.scan.pieces},
                     {"max_piece_slope", so.scan.max_piece_slope},
                     {"behaviour", to_string(res.behavior.at(so.scan.component_index))},
                     {"file", so.file}});
  }
  rep["scans"] = scans;
  ordered_json jacs = ordered_json::array();
  for (const auto& jo : out.jacobians) {
    ordered_json j = {{"at", jo.request.text}};
    if (jo.estimate) {
      j["norm"] = jo.estimate->norm;
      j["norm_all_rows"] = jo.estimate->norm_all_rows;
      j["rows"] = jo.estimate->rows_evaluated;
      j["flagged_rows"] = jo.estimate->flagged_rows;
      j["backward_entries"] = jo.estimate->backward_entries;
      j["delta"] = jo.estimate->delta;
      j["differencing"] = "forward, backward where the forward step switches the Nash pair";
      j["file"] = jo.file;
    } else {
      j["note"] = jo.note;
    }
    jacs.push_back(j);
  }
  rep["jacobians"] = jacs;
  if (out.errors) {
    rep["compare_exact"] = {{"reference", out.errors->reference},
                            {"sup", out.errors->sup},
                            {"mean_abs", out.errors->mean_abs}};
  }
  if (out.admissibility) {
    rep["admissibility"] = {{"verdict", to_string(out.admissibility->verdict)},
                            {"a1_residual_sup", out.admissibility->a1_residual_sup},
                            {"a2_growth_constant", out.admissibility->a2_growth_constant},
                            {"a3_violations", out.admissibility->a3_violations.size()}};
  }
  rep["manifest"] = manifest_text.str();
  rep["files"] = out.files;
  {
    const fs::path path = dir / "report.json";
    auto f = detail::open_output(path);
    f << rep.dump(2) << '\n';
    out.files.push_back("report.json");
  }
  {
    const fs::path path = dir / "manifest.txt";
    auto f = detail::open_output(path);
    write_manifest(f, m);
    out.files.push_back("manifest.txt");
  }
  return out;
}

}  // namespace nashsl
