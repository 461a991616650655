#pragma once

#include "mixlab/domain_mesh.hpp"
#include "mixlab/linear_solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mixlab {

struct Tolerances {
  double linear = 1e-12;
  double outer = 1e-12;
  double eigen = 1e-13;
  double nehari = 1e-9;
};

/// Everything an experiment run reads from its config file.
struct ExperimentConfig {
  DomainSpec domain;
  double q = 0.5;
  double p = 3.0;
  std::optional<double> lambda;                 // absolute; overrides lambda_factors
  std::vector<double> lambda_factors{0.1, 0.3, 0.5};  // multiples of lambda*
  std::vector<std::int64_t> n_schedule;         // strictly increasing
  Tolerances tolerances;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int quad_order = 6;
  std::string output_dir = "out";
  SolverKind linear_solver = SolverKind::cholesky;
  std::vector<double> verify_q_singular{0.3, 0.5, 0.9, 1.0, 2.0, 3.0};
  std::vector<double> verify_q_sobolev{0.3, 0.5, 0.9};

  ExperimentConfig();

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses the flat `section.key = value` format; see README for the grammar.
/// Unknown or repeated keys and malformed values raise ConfigError with the line number.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical `key = value` listing (sorted keys, 17 significant digits). output_dir is
/// left out so that the same experiment written to two places hashes identically.
std::string canonical_config(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of canonical_config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// "%.17g".
std::string format_real(double x);

}  // namespace mixlab
