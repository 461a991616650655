#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace mixlab {

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual_norm = 0.0;  // ||b - A x||_2 / ||b||_2  (0 when b = 0)
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients for a dense SPD matrix.
/// Converged when the true residual satisfies ||b - A x||_2 <= rel_tol * ||b||_2, or
/// when it is at rounding level, ||b - A x||_2 <= 64 eps (||A||_inf ||x||_2 + ||b||_2).
CgResult conjugate_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double rel_tol,
                            int max_iterations, const Eigen::VectorXd* initial_guess = nullptr);

enum class SolverKind { conjugate_gradient, cholesky };

SolverKind parse_solver_kind(const std::string& name);
const char* solver_kind_name(SolverKind kind);

/// Repeated solves with one SPD matrix. The Cholesky variant factors once;
/// the CG variant warm-starts from an optional guess and throws SolverError on
/// non-convergence.
class SpdSolver {
 public:
  SpdSolver(const Eigen::MatrixXd& A, SolverKind kind, double rel_tol = 1e-13,
            int max_iterations = 0);

  Eigen::VectorXd solve(const Eigen::VectorXd& b,
                        const Eigen::VectorXd* initial_guess = nullptr) const;

  SolverKind kind() const { return kind_; }
  const Eigen::MatrixXd& matrix() const { return *A_; }

 private:
  const Eigen::MatrixXd* A_;
  SolverKind kind_;
  double rel_tol_;
  int max_iterations_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> llt_;
};

}  // namespace mixlab
