#pragma once

#include "mixlab/linear_solver.hpp"
#include "mixlab/operators.hpp"

#include <vector>

namespace mixlab {

/// Omega-supported load vector b_i = int_Omega f phi_i with nodal (lumped) quadrature.
Eigen::VectorXd omega_load(const OperatorSet& ops, const GridFunction& f);

struct LinearSolveReport {
  GridFunction u;
  int iterations = 0;
  double residual_norm = 0.0;  // ||A u - b||_2 / ||b||_2
  double energy_value = 0.0;   // 1/2 eta(u)^2 - int_Omega f u
};

/// Solves  L u = f in Omega  with the mixed exterior conditions by Jacobi-PCG on
/// A u = omega_load(f). Throws SolverError when the tolerance is not met.
LinearSolveReport solve_linear(const OperatorSet& ops, const GridFunction& f, double tol,
                               int max_iterations = 0);

struct EigenPair {
  double lambda1 = 0.0;
  GridFunction phi1;  // positive, max-norm 1
  int iterations = 0;
  std::vector<double> rayleigh_history;
};

/// Smallest eigenvalue of  A phi = lambda M_omega phi  by inverse power iteration.
/// Stops when successive Rayleigh quotients agree to `tol` (relative).
EigenPair first_eigenpair(const OperatorSet& ops, double tol,
                          SolverKind kind = SolverKind::conjugate_gradient,
                          int max_iterations = 500);

/// Rayleigh quotient eta(v)^2 / int_Omega v^2 (consistent mass).
double rayleigh_quotient(const OperatorSet& ops, const GridFunction& v);

/// Sign-fix (positive sum) and scale to max-norm one.
GridFunction normalize_eigenvector(const GridFunction& v);

}  // namespace mixlab
