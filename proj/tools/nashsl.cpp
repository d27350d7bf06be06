// nashsl: command-line front end for the builtin differential games.
//
//   nashsl run test1
//   nashsl run test4 --max-iterations=1000 --scan-node=0,0 --scan-node=0,1
//   nashsl run --config=run.cfg --output-dir=out
//   nashsl list

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nashsl/run.hpp"

namespace {

struct Flags {
  std::string config;
  std::string problem;
  std::optional<std::size_t> grid_nodes;
  std::optional<std::size_t> controls_per_player;
  std::optional<double> epsilon1;
  std::optional<double> epsilon2;
  std::optional<int> max_iterations;
  std::optional<std::string> initial_guess;
  std::optional<std::string> boundary_value;
  std::optional<std::string> on_no_nash;
  std::optional<double> time_step;
  std::vector<std::string> scan_nodes;
  std::optional<std::size_t> scan_samples;
  std::optional<double> scan_half_width;
  std::vector<std::string> jacobian_at;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> k1, k2, delta;
};

nashsl::RunManifest build_manifest(const Flags& f, const std::string& positional) {
  nashsl::RunManifest m;
  if (!f.config.empty()) m = nashsl::load_manifest(f.config);
  if (!positional.empty()) m.problem.name = positional;
  if (!f.problem.empty()) m.problem.name = f.problem;
  auto set = [](auto& dst, const auto& src) {
    if (src) dst = *src;
  };
  set(m.problem.grid_nodes, f.grid_nodes);
  set(m.problem.controls_per_player, f.controls_per_player);
  set(m.problem.k1, f.k1);
  set(m.problem.k2, f.k2);
  set(m.problem.delta, f.delta);
  set(m.epsilon1, f.epsilon1);
  set(m.epsilon2, f.epsilon2);
  set(m.max_iterations, f.max_iterations);
  set(m.initial_guess, f.initial_guess);
  set(m.boundary_value, f.boundary_value);
  set(m.on_no_nash, f.on_no_nash);
  set(m.time_step, f.time_step);
  set(m.scan_samples, f.scan_samples);
  set(m.scan_half_width, f.scan_half_width);
  set(m.output_dir, f.output_dir);
  set(m.seed, f.seed);
  if (!f.scan_nodes.empty()) m.scan_nodes = f.scan_nodes;
  if (!f.jacobian_at.empty()) m.jacobian_at = f.jacobian_at;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-Lagrangian Nash equilibrium solver for two-player differential games"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List builtin problems");

  Flags f;
  std::string positional;
  auto* run = app.add_subcommand("run", "Solve a problem and write artifacts");
  run->add_option("name", positional, "Builtin problem name");
  run->add_option("--config", f.config, "Manifest file (key = value); flags override it")
      ->check(CLI::ExistingFile);
  run->add_option("--problem", f.problem, "Builtin problem name");
  run->add_option("--grid-nodes", f.grid_nodes, "Nodes per axis");
  run->add_option("--controls-per-player", f.controls_per_player, "Discrete controls per player");
  run->add_option("--k1", f.k1, "Test 2 slope of player 1's cost");
  run->add_option("--k2", f.k2, "Test 2 slope of player 2's cost");
  run->add_option("--delta", f.delta, "Amplitude of the perturbation in test2-perturbed");
  run->add_option("--epsilon1", f.epsilon1, "Stopping tolerance for player 1");
  run->add_option("--epsilon2", f.epsilon2, "Stopping tolerance for player 2");
  run->add_option("--max-iterations", f.max_iterations, "Iteration cap");
  run->add_option("--initial-guess", f.initial_guess,
                  "constant:C | exact[:name] | perturbed[:name]:amp | file:path");
  run->add_option("--boundary-value", f.boundary_value, "Dirichlet value, 'a,b' or exact[:name]");
  run->add_option("--on-no-nash", f.on_no_nash, "halt | freeze");
  run->add_option("--time-step", f.time_step, "Override h");
  run->add_option("--scan-node", f.scan_nodes,
                  "Node offsets from the origin node, e.g. 0,1 or 0,1:2 for player 2")
      ->allow_extra_args(false);
  run->add_option("--scan-samples", f.scan_samples, "Samples per component scan");
  run->add_option("--scan-half-width", f.scan_half_width, "Half width of the scan interval");
  run->add_option("--jacobian-at", f.jacobian_at, "initial | final | iteration:k")
      ->allow_extra_args(false);
  run->add_option("--output-dir", f.output_dir, "Artifact directory");
  run->add_option("--seed", f.seed, "Seed for perturbed initial guesses");

  CLI11_PARSE(app, argc, argv);

  if (*list) {
    for (const auto& n : nashsl::builtin_names()) std::cout << n << '\n';
    return 0;
  }

  try {
    const nashsl::RunManifest m = build_manifest(f, positional);
    const nashsl::RunOutcome out = nashsl::run(m, std::cerr);
    const auto& res = out.result;
    std::cout << "status: " << nashsl::to_string(res.status) << '\n'
              << "iterations: " << res.iterations << '\n';
    if (!res.history.empty()) {
      const auto& last = res.history.back();
      std::cout << "final increments: " << last.increments[0] << ' ' << last.increments[1] << '\n'
                << "oscillation detected: " << (last.oscillation_detected ? "yes" : "no") << '\n';
    }
    std::cout << "max |U|: " << nashsl::sup_norm(res.fields[0].values) << ' '
              << nashsl::sup_norm(res.fields[1].values) << '\n';
    for (const auto& s : out.scans) {
      std::cout << "scan " << s.request.text << ": " << s.scan.detected_fixed_points.size()
                << " fixed point(s), " << s.scan.detected_jumps.size() << " jump(s)\n";
    }
    for (const auto& j : out.jacobians) {
      if (j.estimate) {
        std::cout << "jacobian " << j.request.text << ": " << j.estimate->norm << '\n';
      } else {
        std::cout << "jacobian " << j.request.text << ": " << j.note << '\n';
      }
    }
    if (out.errors) {
      std::cout << "sup error vs " << out.errors->reference << ": " << out.errors->sup[0] << ' '
                << out.errors->sup[1] << '\n';
    }
    for (const auto& n : res.notes) std::cerr << "note: " << n << '\n';
    std::cout << "artifacts: " << m.output_dir << '\n';
    return out.exit_code;
  } catch (const nashsl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 4;
  } catch (const nashsl::OutOfDomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
