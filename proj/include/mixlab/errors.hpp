#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mixlab {

/// Invalid geometry, mesh, or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a pointwise operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Iterative method that did not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double last_residual,
              std::vector<double> history = {})
      : std::runtime_error(what),
        last_residual_(last_residual),
        history_(std::move(history)) {}

  double last_residual() const noexcept { return last_residual_; }
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  double last_residual_;
  std::vector<double> history_;
};

/// The fiber map of u has no pair of critical points at the requested lambda.
class ProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixlab
