#include "mixlab/elliptic_core.hpp"

#include "mixlab/errors.hpp"

#include <cmath>
#include <sstream>

namespace mixlab {

Eigen::VectorXd omega_load(const OperatorSet& ops, const GridFunction& f) {
  if (static_cast<std::size_t>(f.size()) != ops.dofs())
    throw std::invalid_argument("omega_load: dimension mismatch");
  return ops.omega_weights().cwiseProduct(f);
}

LinearSolveReport solve_linear(const OperatorSet& ops, const GridFunction& f, double tol,
                               int max_iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_linear: tol must be positive");
  if (!f.allFinite()) throw std::invalid_argument("solve_linear: f must be finite");
  const Eigen::VectorXd b = omega_load(ops, f);
  if (max_iterations <= 0) max_iterations = static_cast<int>(10 * ops.dofs() + 100);

  CgResult cg = conjugate_gradient(ops.A, b, tol, max_iterations);
  if (!cg.converged) {
    std::ostringstream msg;
    msg << "solve_linear: no convergence after " << cg.iterations
        << " iterations, relative residual " << cg.residual_norm;
    throw SolverError(msg.str(), cg.residual_norm);
  }
  LinearSolveReport report;
  report.iterations = cg.iterations;
  report.residual_norm = cg.residual_norm;
  report.u = std::move(cg.x);
  report.energy_value = 0.5 * energy_norm_sq(ops, report.u) - b.dot(report.u);
  return report;
}

double rayleigh_quotient(const OperatorSet& ops, const GridFunction& v) {
  return energy_norm_sq(ops, v) / v.dot(ops.M_omega * v);
}

GridFunction normalize_eigenvector(const GridFunction& v) {
  const double sign = v.sum() < 0.0 ? -1.0 : 1.0;
  return sign * v / v.cwiseAbs().maxCoeff();
}

EigenPair first_eigenpair(const OperatorSet& ops, double tol, SolverKind kind,
                          int max_iterations) {
  const SpdSolver solver(ops.A, kind, 1e-14);
  EigenPair out;
  GridFunction x = GridFunction::Ones(static_cast<Eigen::Index>(ops.dofs()));
  double previous = rayleigh_quotient(ops, x);
  out.rayleigh_history.push_back(previous);
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::VectorXd guess = x * (1.0 / previous);
    x = solver.solve(ops.M_omega * x, &guess);
    x /= x.cwiseAbs().maxCoeff();
    const double rq = rayleigh_quotient(ops, x);
    out.rayleigh_history.push_back(rq);
    out.iterations = it;
    if (std::abs(rq - previous) <= tol * rq) {
      out.lambda1 = rq;
      out.phi1 = normalize_eigenvector(x);
      return out;
    }
    previous = rq;
  }
  throw SolverError("first_eigenpair: inverse power iteration did not converge",
                    out.rayleigh_history.back(), out.rayleigh_history);
}

}  // namespace mixlab
