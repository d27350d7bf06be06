#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nashsl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, unknown names, malformed manifests.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A spatial query landed outside the grid box.
class OutOfDomainError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf produced by an update, or a degenerate quantity (e.g. ||f|| = 0).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// No pure Nash pair exists at a node and the halt policy is active.
class NoNashError : public Error {
 public:
  NoNashError(std::size_t node, int iteration)
      : Error("no discrete Nash equilibrium at node " + std::to_string(node) +
              " (iteration " + std::to_string(iteration) + ")"),
        node_(node),
        iteration_(iteration) {}

  std::size_t node() const noexcept { return node_; }
  int iteration() const noexcept { return iteration_; }

 private:
  std::size_t node_;
  int iteration_;
};

/// A trajectory left its bounding box before the horizon.
class TrajectoryExitError : public Error {
 public:
  explicit TrajectoryExitError(double exit_time)
      : Error("trajectory left the bounding box at t = " +
              std::to_string(exit_time)),
        exit_time_(exit_time) {}

  double exit_time() const noexcept { return exit_time_; }

 private:
  double exit_time_;
};

}  // namespace nashsl
