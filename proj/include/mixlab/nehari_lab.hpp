#pragma once

#include "mixlab/elliptic_core.hpp"
#include "mixlab/linear_solver.hpp"
#include "mixlab/operators.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mixlab {

/// g(u) = lambda u^{-q} + u^p.
struct PerturbedParams {
  double lambda = 0.1;
  double q = 0.5;
  double p = 3.0;

  /// 0 < q < 1 < p <= 6, lambda > 0; throws ConfigError.
  void validate() const;
};

/// J(u) = 1/2 eta(u)^2 - lambda/(1-q) int|u|^{1-q} - 1/(p+1) int|u|^{p+1}.
double J_lambda(const OperatorSet& ops, const GridFunction& u, const PerturbedParams& prm);

/// The three integrals that determine the fiber map t -> J(t u).
struct FiberData {
  double eta_sq = 0.0;
  double M = 0.0;  // int_Omega |u|^{1-q}
  double N = 0.0;  // int_Omega |u|^{p+1}
};

FiberData fiber_data(const OperatorSet& ops, const GridFunction& u, const PerturbedParams& prm);

double fiber_value(const FiberData& d, const PerturbedParams& prm, double t);
/// Phi'(t) = t eta^2 - lambda t^{-q} M - t^p N.
double fiber_derivative(const FiberData& d, const PerturbedParams& prm, double t);
/// Phi''(t) = eta^2 + lambda q t^{-q-1} M - p t^{p-1} N.
double fiber_second_derivative(const FiberData& d, const PerturbedParams& prm, double t);

/// Maximizer of mu(t) = t^{1+q} eta^2 - t^{p+q} N.
double fiber_t_max(const FiberData& d, const PerturbedParams& prm);
double fiber_mu(const FiberData& d, const PerturbedParams& prm, double t);

struct FiberMapReport {
  double M_u = 0.0;
  double N_u = 0.0;
  double eta_sq = 0.0;
  double t_max = 0.0;
  double mu_at_tmax = 0.0;
  double t_star = 0.0;        // local minimum of the fiber (N^+ scaling)
  double t_star_upper = 0.0;  // local maximum of the fiber (N^- scaling)
  double phi_d_at_t_star = 0.0;
  double phi_d_at_t_upper = 0.0;
  double phi_dd_at_t_star = 0.0;
  double phi_dd_at_t_upper = 0.0;
};

/// Both critical points of the fiber map of u. Throws ProjectionError when
/// mu(t_max) <= lambda M (no two critical points), std::invalid_argument for u = 0 on Omega.
FiberMapReport fiber_analyze(const FiberData& d, const PerturbedParams& prm);
FiberMapReport fiber_analyze(const OperatorSet& ops, const GridFunction& u,
                             const PerturbedParams& prm);

struct EmbeddingOptions {
  double tol = 1e-10;
  int max_iterations = 20000;
  int random_starts = 4;
  std::uint64_t seed = 11;
};

struct EmbeddingEstimate {
  double alpha = 0.0;
  double value = 0.0;      // sup { int_Omega |u|^alpha : eta(u) = 1 }, best found
  GridFunction maximizer;  // eta = 1, nonnegative
  int iterations = 0;      // of the best start
};

/// Normalized ascent u <- normalize((1-tau) u + tau A^{-1}(w u^{alpha-1})) with
/// backtracking, from random positive starts plus the optional seeds.
EmbeddingEstimate embedding_constant(const OperatorSet& ops, const SpdSolver& solver,
                                     double alpha, const EmbeddingOptions& opt,
                                     const std::vector<GridFunction>& seeds = {});

struct LambdaStar {
  double value = 0.0;
  EmbeddingEstimate C_p1;   // alpha = p + 1
  EmbeddingEstimate C_1mq;  // alpha = 1 - q
};

/// Closed-form threshold
///   ((p-1)/(p+q)) ((1+q)/(p+q))^{(1+q)/(p-1)} C_{p+1}^{-(1+q)/(p-1)} / C_{1-q}.
double lambda_star_formula(double q, double p, double C_p1, double C_1mq);

LambdaStar lambda_star(const OperatorSet& ops, const SpdSolver& solver, double q, double p,
                       const EmbeddingOptions& opt, const std::vector<GridFunction>& seeds = {});

struct Barrier {
  double beta = 0.0;      // min(beta_cap, beta_sub)
  double beta_cap = 0.0;  // (lambda q / p)^{1/(p+q)}: f^{p+q} <= lambda q / p
  double beta_sub = 0.0;  // largest beta for which beta phi_1 is a strict discrete subsolution
  GridFunction f;         // beta phi_1
};

/// f = beta phi_1 with ||phi_1||_inf = 1. beta_sub is the bound from
///   beta lambda_1 (M_omega phi_1)_i < lambda w_i (beta phi_1,i)^{-q}  on Omega DOFs.
Barrier barrier(const OperatorSet& ops, const PerturbedParams& prm, const EigenPair& eig);

/// Closed form of the cap alone.
double barrier_cap(const PerturbedParams& prm);

enum class Branch { plus, minus };
const char* branch_name(Branch b);

struct NehariOptions {
  double tol = 1e-9;  // ||A u - g(u)||_inf
  int max_iterations = 5000;
};

struct NehariRun {
  Branch branch = Branch::plus;
  bool converged = false;
  std::string failure;
  GridFunction u;
  double J = 0.0;
  double residual = 0.0;
  double eta = 0.0;
  double sup = 0.0;
  double omega_min = 0.0;
  double phi_dd_at_one = 0.0;  // Phi_u''(1)
  int iterations = 0;
  std::vector<double> J_history;
  std::vector<double> eta_history;
};

/// Descent for J restricted to N^+ (plus) or N^- (minus): every iterate is the
/// fiber projection t(w) w of its predecessor's update
///   w = (1 - tau) u + tau A^{-1} g(u),   g(u) = lambda w u^{-q} + w u^p,
/// with Armijo backtracking on J. Never throws; failures are reported in the run.
NehariRun minimize_nehari(const OperatorSet& ops, const SpdSolver& solver,
                          const PerturbedParams& prm, Branch branch, const GridFunction& seed,
                          const NehariOptions& opt);

/// Nodal weak residual  max_i |(A u)_i - w_i (lambda u_i^{-q} + u_i^p)|.
double nehari_residual(const OperatorSet& ops, const GridFunction& u, const PerturbedParams& prm);

struct NehariPair {
  NehariRun plus;
  NehariRun minus;
  double separation = 0.0;  // eta(u_plus - u_minus)
};

NehariPair nehari_pair(const OperatorSet& ops, const SpdSolver& solver,
                       const PerturbedParams& prm, const GridFunction& seed,
                       const NehariOptions& opt);

/// Coercivity constants on the Nehari set: J >= A eta^2 - B eta^{1-q}.
struct Coercivity {
  double A = 0.0;
  double B = 0.0;
};
Coercivity coercivity_constants(const PerturbedParams& prm, double C_1mq);

/// Smallest mu with mu t^{-q} + t^p >= (lambda_1 + eps) t for all t > 0, eps = eps_factor lambda_1.
double mu_star(double q, double p, double lambda1, double eps_factor = 0.01);

struct FinitenessWitness {
  double mu_star = 0.0;
  double lambda_tested = 0.0;  // 2 mu_star
  bool nonexistence_observed = false;
  std::string detail;
};

/// Runs minimize_nehari(plus) at lambda = 2 mu_star and records whether it
/// fails to produce a positive solution.
FinitenessWitness lambda_finiteness_witness(const OperatorSet& ops, const SpdSolver& solver,
                                            double q, double p, const EigenPair& eig,
                                            const NehariOptions& opt);

}  // namespace mixlab
