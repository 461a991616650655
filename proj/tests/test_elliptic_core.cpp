#include "doctest.h"

#include "mixlab/elliptic_core.hpp"
#include "mixlab/errors.hpp"
#include "mixlab/random_fields.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace mixlab;

namespace {

DomainSpec domain(double h, double kappa = 1.0) {
  DomainSpec d;
  d.h = h;
  d.kernel_constant = kappa;
  return d;
}

const OperatorSet& ops128() {
  static const OperatorSet ops = assemble(build_mesh(domain(1.0 / 128)));
  return ops;
}

// Largest eigenvalue of L^{-1} B L^{-T} with A = L L^T is 1 / lambda_min(A, B).
double dense_smallest(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::LLT<Eigen::MatrixXd> llt(A);
  const Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
  const Eigen::MatrixXd C = Linv * B * Linv.transpose();
  return 1.0 / Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (C + C.transpose()), Eigen::EigenvaluesOnly)
                   .eigenvalues()
                   .maxCoeff();
}

// Coarse DOF vector expressed on the mesh with half the spacing (exact for P1).
GridFunction prolong(const Mesh& coarse, const Mesh& fine, const GridFunction& u) {
  GridFunction out(static_cast<Eigen::Index>(fine.dof_count()));
  for (std::size_t i = 0; i < fine.dof_count(); ++i)
    out[static_cast<Eigen::Index>(i)] = coarse.evaluate(u, fine.dof_coordinate(i));
  return out;
}

}  // namespace

TEST_SUITE("elliptic_core") {
  TEST_CASE("zero data gives the zero solution without iterating") {
    const OperatorSet& ops = ops128();
    const LinearSolveReport r = solve_linear(ops, GridFunction::Zero(static_cast<Eigen::Index>(ops.dofs())), 1e-12);
    CHECK(r.u.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.iterations == 0);
  }

  TEST_CASE("constant data gives a positive solution on omega") {
    const OperatorSet& ops = ops128();
    const LinearSolveReport r = solve_linear(ops, GridFunction::Ones(static_cast<Eigen::Index>(ops.dofs())), 1e-12);
    CHECK(r.residual_norm <= 1e-10);
    for (std::size_t i = 0; i < ops.dofs(); ++i)
      if (ops.mesh.dof_region(i) == Region::omega_interior) CHECK(r.u[static_cast<Eigen::Index>(i)] > 0.0);
    // The solution minimizes the energy: its value is -1/2 int f u.
    CHECK(r.energy_value == doctest::Approx(-0.5 * omega_load(ops, GridFunction::Ones(r.u.size())).dot(r.u)).epsilon(1e-10));
  }

  TEST_CASE("load vector uses the lumped omega weights") {
    const OperatorSet& ops = ops128();
    const GridFunction f = random_positive(ops.dofs(), 3);
    const Eigen::VectorXd b = omega_load(ops, f);
    CHECK((b - ops.omega_weights().cwiseProduct(f)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("positivity for random nonnegative data") {
    const OperatorSet& ops = ops128();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      GridFunction f = random_positive(ops.dofs(), seed, 0.0, 1.0);
      if (seed % 2 == 0) {
        f.setZero();
        f[static_cast<Eigen::Index>(seed * 5)] = 1.0;
      }
      const GridFunction u = solve_linear(ops, f, 1e-12).u;
      for (std::size_t i = 0; i < ops.dofs(); ++i)
        if (ops.mesh.dof_region(i) == Region::omega_interior) CHECK(u[static_cast<Eigen::Index>(i)] > 0.0);
    }
  }

  TEST_CASE("sup norm is controlled by the data") {
    const OperatorSet& ops = ops128();
    const double bound = solve_linear(ops, GridFunction::Ones(static_cast<Eigen::Index>(ops.dofs())), 1e-12).u.maxCoeff();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const GridFunction f = random_signed(ops.dofs(), seed);
      const GridFunction u = solve_linear(ops, f, 1e-12).u;
      CHECK(u.cwiseAbs().maxCoeff() <= bound * f.cwiseAbs().maxCoeff() * (1.0 + 1e-10));
    }
  }

  TEST_CASE("mesh refinement self-convergence") {
    const OperatorSet c = assemble(build_mesh(domain(1.0 / 128)));
    const OperatorSet f = assemble(build_mesh(domain(1.0 / 256)));
    const GridFunction uc = solve_linear(c, GridFunction::Ones(static_cast<Eigen::Index>(c.dofs())), 1e-12).u;
    const GridFunction uf = solve_linear(f, GridFunction::Ones(static_cast<Eigen::Index>(f.dofs())), 1e-12).u;
    const double diff = energy_norm(f, prolong(c.mesh, f.mesh, uc) - uf);
    CHECK(diff <= c.mesh.h() * energy_norm(f, uf) * 10.0);
  }

  TEST_CASE("non-convergence reports the last residual") {
    const OperatorSet& ops = ops128();
    try {
      solve_linear(ops, GridFunction::Ones(static_cast<Eigen::Index>(ops.dofs())), 1e-14, 2);
      FAIL("expected SolverError");
    } catch (const SolverError& e) {
      CHECK(e.last_residual() > 0.0);
    }
  }

  TEST_CASE("first eigenvalue matches a dense eigensolver") {
    const OperatorSet& ops = ops128();
    const double ref = dense_smallest(ops.A, ops.M_omega);
    for (SolverKind kind : {SolverKind::conjugate_gradient, SolverKind::cholesky}) {
      const EigenPair e = first_eigenpair(ops, 1e-13, kind);
      CHECK(std::abs(e.lambda1 - ref) <= 1e-8 * ref);
      CHECK(rayleigh_quotient(ops, e.phi1) == doctest::Approx(e.lambda1).epsilon(1e-10));
      CHECK(e.phi1.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
      for (std::size_t i = 0; i < ops.dofs(); ++i)
        if (ops.mesh.dof_region(i) == Region::omega_interior) CHECK(e.phi1[static_cast<Eigen::Index>(i)] > 0.0);
      CHECK(e.rayleigh_history.size() == static_cast<std::size_t>(e.iterations) + 1);
    }
  }

  TEST_CASE("weak nonlocal part approaches the local mixed eigenvalue") {
    const OperatorSet ops = assemble(build_mesh(domain(1.0 / 64, 1e-6)));
    // Local problem on Omega dofs only: Dirichlet at a, natural condition at b.
    const Eigen::Index n = static_cast<Eigen::Index>(ops.mesh.neumann_node());
    const double local = dense_smallest(ops.A_loc.topLeftCorner(n, n), ops.M_omega.topLeftCorner(n, n));
    const EigenPair e = first_eigenpair(ops, 1e-13, SolverKind::cholesky);
    CHECK(std::abs(e.lambda1 - local) <= 1e-4 * local);
    // Continuum value (pi/2)^2 for -u'' on (0,1), u(0)=0, u'(1)=0.
    CHECK(local == doctest::Approx(M_PI * M_PI / 4.0).epsilon(1e-3));
  }

  TEST_CASE("eigenvector normalization is idempotent") {
    const OperatorSet& ops = ops128();
    const EigenPair e = first_eigenpair(ops, 1e-13, SolverKind::cholesky);
    CHECK((normalize_eigenvector(2.0 * e.phi1) - e.phi1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((normalize_eigenvector(-3.0 * e.phi1) - e.phi1).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_SUITE("linear_solver") {
  TEST_CASE("conjugate gradient agrees with Cholesky") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd B(40, 40);
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = n01(gen);
    const Eigen::MatrixXd A = B * B.transpose() + 40.0 * Eigen::MatrixXd::Identity(40, 40);
    Eigen::VectorXd b(40);
    for (Eigen::Index i = 0; i < 40; ++i) b[i] = n01(gen);
    const CgResult r = conjugate_gradient(A, b, 1e-12, 1000);
    CHECK(r.converged);
    CHECK((r.x - A.llt().solve(b)).norm() <= 1e-10 * r.x.norm());
    const SpdSolver cg(A, SolverKind::conjugate_gradient, 1e-12), chol(A, SolverKind::cholesky);
    CHECK((cg.solve(b) - chol.solve(b)).norm() <= 1e-10 * b.norm());
  }

  TEST_CASE("indefinite matrix is rejected by Cholesky") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
    A(2, 2) = -1.0;
    CHECK_THROWS_AS(SpdSolver(A, SolverKind::cholesky), SolverError);
  }

  TEST_CASE("solver names") {
    CHECK(parse_solver_kind("cg") == SolverKind::conjugate_gradient);
    CHECK(parse_solver_kind("conjugate_gradient") == SolverKind::conjugate_gradient);
    CHECK(parse_solver_kind("cholesky") == SolverKind::cholesky);
    CHECK_THROWS_AS(parse_solver_kind("lu"), ConfigError);
    CHECK(std::string(solver_kind_name(SolverKind::cholesky)) == "cholesky");
  }
}
