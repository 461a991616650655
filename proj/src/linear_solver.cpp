#include "mixlab/linear_solver.hpp"

#include "mixlab/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace mixlab {

CgResult conjugate_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double rel_tol,
                            int max_iterations, const Eigen::VectorXd* initial_guess) {
  const Eigen::Index n = b.size();
  CgResult out;
  out.x = initial_guess ? *initial_guess : Eigen::VectorXd::Zero(n);
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    out.x.setZero();
    out.converged = true;
    return out;
  }
  const double a_norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  // Below this the residual is rounding noise (normwise backward error ~ eps).
  auto floor_for = [&](const Eigen::VectorXd& x) {
    return 16.0 * std::numeric_limits<double>::epsilon() * (a_norm * x.norm() + b_norm);
  };
  const Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
  Eigen::VectorXd r = b - A * out.x;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  Eigen::VectorXd Ap(n);
  double rz = r.dot(z);
  const double target = rel_tol * b_norm;

  double r_norm = r.norm();
  int it = 0;
  while (it < max_iterations) {
    if (r_norm <= std::max(target, floor_for(out.x))) {
      // The recursive residual drifts from the true one; confirm before stopping.
      r = b - A * out.x;
      r_norm = r.norm();
      if (r_norm <= std::max(target, floor_for(out.x))) {
        out.converged = true;
        break;
      }
    }
    Ap.noalias() = A * p;
    const double alpha = rz / p.dot(Ap);
    out.x += alpha * p;
    r -= alpha * Ap;
    ++it;
    if (it % 50 == 0) r = b - A * out.x;
    r_norm = r.norm();
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  const double true_norm = (b - A * out.x).norm();
  out.iterations = it;
  out.residual_norm = true_norm / b_norm;
  out.converged = true_norm <= std::max(target, floor_for(out.x));
  return out;
}

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "cg" || name == "conjugate_gradient") return SolverKind::conjugate_gradient;
  if (name == "cholesky") return SolverKind::cholesky;
  throw ConfigError("unknown linear solver '" + name + "' (expected cg or cholesky)");
}

const char* solver_kind_name(SolverKind kind) {
  return kind == SolverKind::cholesky ? "cholesky" : "cg";
}

SpdSolver::SpdSolver(const Eigen::MatrixXd& A, SolverKind kind, double rel_tol,
                     int max_iterations)
    : A_(&A), kind_(kind), rel_tol_(rel_tol), max_iterations_(max_iterations) {
  if (max_iterations_ <= 0) max_iterations_ = static_cast<int>(10 * A.rows() + 100);
  if (kind_ == SolverKind::cholesky) {
    llt_.emplace(A);
    if (llt_->info() != Eigen::Success)
      throw SolverError("Cholesky factorization failed: matrix is not positive definite", 0.0);
  }
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b,
                                 const Eigen::VectorXd* initial_guess) const {
  if (kind_ == SolverKind::cholesky) return llt_->solve(b);
  CgResult res = conjugate_gradient(*A_, b, rel_tol_, max_iterations_, initial_guess);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "conjugate gradients did not converge in " << res.iterations
        << " iterations (relative residual " << res.residual_norm << ")";
    throw SolverError(msg.str(), res.residual_norm);
  }
  return std::move(res.x);
}

}  // namespace mixlab
