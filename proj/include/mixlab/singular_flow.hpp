#pragma once

#include "mixlab/linear_solver.hpp"
#include "mixlab/operators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mixlab {

/// Truncated primitive of the regularized singular term:
///   G_n(v) = (v^+ + 1/n)^{1-q} / (1-q) - n^q v^-,   0 < q < 1.
double regularized_primitive(double v, double n, double q);
/// G_n'(v) = (v^+ + 1/n)^{-q}.
double regularized_primitive_derivative(double v, double n, double q);

/// I_n(v) = 1/2 eta(v)^2 - int_Omega G_n(v)  with nodal quadrature.
double regularized_functional(const OperatorSet& ops, const GridFunction& v, double n, double q);

/// b_i = w_i (u_i^+ + 1/n)^{-q} on Omega DOFs.
Eigen::VectorXd regularized_load(const OperatorSet& ops, const GridFunction& u, double n,
                                 double q);

struct RegularizedLevel {
  std::int64_t n = 1;
  double q = 0.5;
  GridFunction u;
  int outer_iterations = 0;
  double weak_residual = 0.0;  // ||A u - b(u)||_inf
  double energy_sq = 0.0;      // eta(u_n)^2
  double sup = 0.0;            // max over all nodes
  double omega_min = 0.0;      // min over the middle half of Omega
};

struct LevelOptions {
  double tol = 1e-12;  // successive iterates closer than this in energy norm
  int max_outer = 2000;
};

/// Relaxation factor of the outer fixed-point map. The Jacobian of T at the
/// fixed point has spectrum in [-q, 0], so 2/(2+q) contracts for every q > 0.
double fixed_point_relaxation(double q);

/// Solves L u = (u + 1/n)^{-q} + source in Omega by the relaxed fixed-point map
/// u <- (1-theta) u + theta A^{-1} b(u). `source` is an optional nonnegative
/// nodal function. Throws SolverError on non-convergence.
RegularizedLevel solve_level(const OperatorSet& ops, const SpdSolver& solver, std::int64_t n,
                             double q, const GridFunction& u_init, const LevelOptions& opt,
                             const GridFunction* source = nullptr);

struct SingularLimit {
  double q = 0.5;
  GridFunction u_hat;
  std::vector<RegularizedLevel> levels;
  double identity_gap = 0.0;  // |eta(u_hat)^2 - int u_hat^{1-q}|, q < 1 only
  double max_monotonicity_violation = 0.0;  // max_k max_nodes (u_{n_k} - u_{n_{k+1}})
  double max_energy_decrease = 0.0;         // max_k (eta(u_{n_k}) - eta(u_{n_{k+1}}))
  double interior_lower_bound = 0.0;        // min over levels of omega_min
  std::optional<std::size_t> failed_level;
  std::string failure;

  bool ok() const { return !failed_level.has_value(); }
};

/// 1, 2, 4, ..., 2^max_exponent.
std::vector<std::int64_t> dyadic_schedule(int max_exponent);

/// Solves every level of `schedule` (strictly increasing), warm-starting each
/// from the previous one. A failing level stops the run and is reported in the
/// result rather than thrown.
SingularLimit run_schedule(const OperatorSet& ops, const SpdSolver& solver, double q,
                           const std::vector<std::int64_t>& schedule, const LevelOptions& opt,
                           const GridFunction* u_init = nullptr);

/// eta(u^{(q+1)/2})^2 with the power taken nodally.
double transformed_energy(const OperatorSet& ops, const GridFunction& u, double q);

struct TransformedBound {
  double max_energy = 0.0;
  double bound = 0.0;  // (q+1)^2/(4q) |Omega|
  bool violated = false;
};

TransformedBound transformed_energy_bound(const OperatorSet& ops,
                                          const std::vector<RegularizedLevel>& levels, double q,
                                          double slack = 0.01);

/// (x - y)(x^a - y^a) >= 4a/(a+1)^2 (x^{(a+1)/2} - y^{(a+1)/2})^2, up to 1e-12.
bool algebraic_inequality_check(double x, double y, double alpha);

struct ComparisonResult {
  bool holds = false;
  double min_margin = 0.0;  // min over DOFs of v - u
  GridFunction v;
};

/// Weak comparison on a constructed pair: `u` is level n of L u = u^{-q}; v solves
/// L v - v^{-q} = delta >= 0 at the same level, so L v - v^{-q} >= L u - u^{-q}.
/// Checks v >= u - tol at every DOF.
ComparisonResult comparison_check(const OperatorSet& ops, const SpdSolver& solver,
                                  const RegularizedLevel& u, const GridFunction& delta,
                                  double tol, const LevelOptions& opt = {});

double sup_norm(const GridFunction& u);

/// int_Omega |u|^alpha with the lumped Omega weights.
double omega_power_integral(const OperatorSet& ops, const GridFunction& u, double alpha);

}  // namespace mixlab
