#pragma once

#include "mixlab/linear_solver.hpp"
#include "mixlab/operators.hpp"

#include <cstdint>
#include <vector>

namespace mixlab {

/// eta(u_hat)^{-(2+2q)/(1-q)}. Throws std::invalid_argument unless 0 < q < 1.
double constant_from_limit(const OperatorSet& ops, const GridFunction& u_hat, double q);

/// V = (int_Omega u_hat^{1-q})^{-1/(1-q)} u_hat, the normalized extremal.
GridFunction extremal_from_limit(const OperatorSet& ops, const GridFunction& u_hat, double q);

/// Rescales v onto  int_Omega |v|^{1-q} = 1. Throws DomainError if v vanishes on Omega.
GridFunction normalize_to_constraint(const OperatorSet& ops, const GridFunction& v, double q);

struct RayleighOptions {
  double tol = 1e-10;  // stop when eta(step) <= tol * eta(v)
  int max_iterations = 20000;
  int random_starts = 5;
  std::uint64_t seed = 1;
};

struct RayleighRun {
  std::uint64_t seed = 0;  // 0 for the supplied seed vector
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct RayleighResult {
  double value = 0.0;
  GridFunction argmin;  // nonnegative, on the constraint set
  std::vector<RayleighRun> runs;
};

/// inf { eta(v)^2 : int_Omega |v|^{1-q} = 1 } over nonnegative v by an
/// H^1(A)-preconditioned projected gradient with renormalization, started from
/// `random_starts` positive random vectors and, when given, `seed_vector`.
/// Throws SolverError if no start converges.
RayleighResult constant_by_rayleigh(const OperatorSet& ops, const SpdSolver& solver, double q,
                                    const RayleighOptions& opt,
                                    const GridFunction* seed_vector = nullptr);

struct InequalitySides {
  double lhs = 0.0;  // eta(v)^2
  double rhs = 0.0;  // C (int_Omega |v|^{1-q})^{2/(1-q)}
};

InequalitySides inequality_sides(const OperatorSet& ops, double q, double C,
                                 const GridFunction& v);

/// eta(v)^2 >= C (int_Omega |v|^{1-q})^{2/(1-q)}, accepted with relative slack 1e-9.
bool verify_inequality(const OperatorSet& ops, double q, double C, const GridFunction& v);

/// <u, v>_A / (eta(u) eta(v)).
double energy_cosine(const OperatorSet& ops, const GridFunction& u, const GridFunction& v);

struct SobolevReport {
  double q = 0.5;
  double R_formula = 0.0;
  double R_rayleigh = 0.0;
  GridFunction extremal_V;
  GridFunction rayleigh_argmin;
  double equality_gap = 0.0;     // |R_rayleigh - R_formula| / R_formula
  double argmin_distance = 0.0;  // eta(argmin - V)
  int random_tests = 0;
  int random_test_failures = 0;
  bool sharpness_witness = false;  // inequality with 1.05 R_formula fails at V
};

/// Runs both routes to the constant from a converged u_hat and checks the
/// inequality on `random_tests` sign-unrestricted vectors.
SobolevReport sobolev_report(const OperatorSet& ops, const SpdSolver& solver,
                             const GridFunction& u_hat, double q, const RayleighOptions& opt,
                             int random_tests = 1000);

}  // namespace mixlab
