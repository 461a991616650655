#include "mixlab/nehari_lab.hpp"

#include "mixlab/errors.hpp"
#include "mixlab/random_fields.hpp"
#include "mixlab/singular_flow.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace mixlab {

void PerturbedParams::validate() const {
  std::ostringstream msg;
  if (!(lambda > 0.0) || !std::isfinite(lambda)) msg << "lambda must be positive (got " << lambda << ")";
  else if (!(q > 0.0 && q < 1.0)) msg << "q must lie in (0,1) (got " << q << ")";
  else if (!(p > 1.0 && p <= 6.0)) msg << "p must lie in (1,6] (got " << p << ")";
  else return;
  throw ConfigError("problem: " + msg.str());
}

FiberData fiber_data(const OperatorSet& ops, const GridFunction& u, const PerturbedParams& prm) {
  FiberData d;
  d.eta_sq = energy_norm_sq(ops, u);
  d.M = omega_power_integral(ops, u, 1.0 - prm.q);
  d.N = omega_power_integral(ops, u, prm.p + 1.0);
  return d;
}

double J_lambda(const OperatorSet& ops, const GridFunction& u, const PerturbedParams& prm) {
  return fiber_value(fiber_data(ops, u, prm), prm, 1.0);
}

double fiber_value(const FiberData& d, const PerturbedParams& prm, double t) {
  const double q = prm.q, p = prm.p;
  return 0.5 * t * t * d.eta_sq - prm.lambda / (1.0 - q) * std::pow(t, 1.0 - q) * d.M -
         std::pow(t, p + 1.0) * d.N / (p + 1.0);
}

double fiber_derivative(const FiberData& d, const PerturbedParams& prm, double t) {
  return t * d.eta_sq - prm.lambda * std::pow(t, -prm.q) * d.M - std::pow(t, prm.p) * d.N;
}

double fiber_second_derivative(const FiberData& d, const PerturbedParams& prm, double t) {
  return d.eta_sq + prm.lambda * prm.q * std::pow(t, -prm.q - 1.0) * d.M -
         prm.p * std::pow(t, prm.p - 1.0) * d.N;
}

double fiber_mu(const FiberData& d, const PerturbedParams& prm, double t) {
  return std::pow(t, 1.0 + prm.q) * d.eta_sq - std::pow(t, prm.p + prm.q) * d.N;
}

double fiber_t_max(const FiberData& d, const PerturbedParams& prm) {
  const double q = prm.q, p = prm.p;
  return std::pow((1.0 + q) * d.eta_sq / ((p + q) * d.N), 1.0 / (p - 1.0));
}

FiberMapReport fiber_analyze(const FiberData& d, const PerturbedParams& prm) {
  if (!(d.M > 0.0) || !(d.N > 0.0) || !(d.eta_sq > 0.0))
    throw std::invalid_argument("fiber_analyze: u must not vanish on Omega");
  FiberMapReport r;
  r.M_u = d.M;
  r.N_u = d.N;
  r.eta_sq = d.eta_sq;
  r.t_max = fiber_t_max(d, prm);
  // Closed form of mu(t_max); agrees with fiber_mu(d, prm, t_max).
  r.mu_at_tmax = std::pow(r.t_max, 1.0 + prm.q) * d.eta_sq * (prm.p - 1.0) / (prm.p + prm.q);
  const double level = prm.lambda * d.M;
  if (!(r.mu_at_tmax > level)) {
    std::ostringstream msg;
    msg << "fiber_analyze: no two critical points (mu(t_max)=" << r.mu_at_tmax
        << " <= lambda*M=" << level << ")";
    throw ProjectionError(msg.str());
  }

  // Phi'(t) = t^{-q} (mu(t) - lambda M): the roots of psi are the critical points.
  auto psi = [&](double t) { return fiber_mu(d, prm, t) - level; };
  boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 3);
  std::uintmax_t iters = 200;
  auto lo = boost::math::tools::toms748_solve(psi, 0.0, r.t_max, -level, psi(r.t_max) , tol, iters);
  r.t_star = 0.5 * (lo.first + lo.second);

  double hi = 2.0 * r.t_max;
  while (psi(hi) >= 0.0) hi *= 2.0;
  iters = 200;
  auto up = boost::math::tools::toms748_solve(psi, r.t_max, hi, psi(r.t_max), psi(hi), tol, iters);
  r.t_star_upper = 0.5 * (up.first + up.second);

  r.phi_d_at_t_star = fiber_derivative(d, prm, r.t_star);
  r.phi_d_at_t_upper = fiber_derivative(d, prm, r.t_star_upper);
  r.phi_dd_at_t_star = fiber_second_derivative(d, prm, r.t_star);
  r.phi_dd_at_t_upper = fiber_second_derivative(d, prm, r.t_star_upper);
  return r;
}

FiberMapReport fiber_analyze(const OperatorSet& ops, const GridFunction& u,
                             const PerturbedParams& prm) {
  return fiber_analyze(fiber_data(ops, u, prm), prm);
}

namespace {

GridFunction normalize_energy(const OperatorSet& ops, const GridFunction& u) {
  return u / energy_norm(ops, u);
}

Eigen::VectorXd power_load(const OperatorSet& ops, const GridFunction& u, double exponent) {
  const Eigen::VectorXd& w = ops.omega_weights();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (w[i] > 0.0) b[i] = w[i] * std::pow(u[i], exponent);
  return b;
}

EmbeddingEstimate ascend(const OperatorSet& ops, const SpdSolver& solver, double alpha,
                         const EmbeddingOptions& opt, GridFunction u) {
  EmbeddingEstimate e;
  e.alpha = alpha;
  u = normalize_energy(ops, u);
  double value = omega_power_integral(ops, u, alpha);
  double tau = 1.0;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const GridFunction z = normalize_energy(ops, solver.solve(power_load(ops, u, alpha - 1.0)));
    const GridFunction d = z - u;
    const double step = energy_norm(ops, d);
    if (step <= opt.tol) break;
    tau = std::min(1.0, 2.0 * tau);
    bool accepted = false;
    while (tau > 1e-14) {
      GridFunction cand = normalize_energy(ops, u + tau * d);
      const double cv = omega_power_integral(ops, cand, alpha);
      if (cv >= value) {
        u = std::move(cand);
        value = cv;
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) break;
  }
  e.value = value;
  e.maximizer = std::move(u);
  e.iterations = it;
  return e;
}

}  // namespace

EmbeddingEstimate embedding_constant(const OperatorSet& ops, const SpdSolver& solver,
                                     double alpha, const EmbeddingOptions& opt,
                                     const std::vector<GridFunction>& seeds) {
  if (!(alpha > 0.0)) throw std::invalid_argument("embedding_constant: alpha must be positive");
  EmbeddingEstimate best;
  best.alpha = alpha;
  best.value = -1.0;
  auto consider = [&](const GridFunction& start) {
    EmbeddingEstimate e = ascend(ops, solver, alpha, opt, start);
    if (e.value > best.value) best = std::move(e);
  };
  for (int k = 0; k < opt.random_starts; ++k)
    consider(random_positive(ops.dofs(), opt.seed + static_cast<std::uint64_t>(k)));
  for (const GridFunction& s : seeds) {
    if (s.minCoeff() <= 0.0)
      throw std::invalid_argument("embedding_constant: seeds must be positive");
    consider(s);
  }
  if (!(best.value > 0.0)) throw SolverError("embedding_constant: ascent failed", best.value);
  return best;
}

double lambda_star_formula(double q, double p, double C_p1, double C_1mq) {
  const double e = (1.0 + q) / (p - 1.0);
  return (p - 1.0) / (p + q) * std::pow((1.0 + q) / (p + q), e) * std::pow(C_p1, -e) / C_1mq;
}

LambdaStar lambda_star(const OperatorSet& ops, const SpdSolver& solver, double q, double p,
                       const EmbeddingOptions& opt, const std::vector<GridFunction>& seeds) {
  PerturbedParams{1.0, q, p}.validate();
  LambdaStar out;
  out.C_p1 = embedding_constant(ops, solver, p + 1.0, opt, seeds);
  out.C_1mq = embedding_constant(ops, solver, 1.0 - q, opt, seeds);
  out.value = lambda_star_formula(q, p, out.C_p1.value, out.C_1mq.value);
  return out;
}

double barrier_cap(const PerturbedParams& prm) {
  return std::pow(prm.lambda * prm.q / prm.p, 1.0 / (prm.p + prm.q));
}

Barrier barrier(const OperatorSet& ops, const PerturbedParams& prm, const EigenPair& eig) {
  prm.validate();
  if (std::abs(eig.phi1.cwiseAbs().maxCoeff() - 1.0) > 1e-12)
    throw std::invalid_argument("barrier: phi_1 must have sup norm 1");
  Barrier b;
  b.beta_cap = barrier_cap(prm);
  const Eigen::VectorXd& w = ops.omega_weights();
  const Eigen::VectorXd mphi = ops.M_omega * eig.phi1;
  double ratio = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) continue;
    if (!(eig.phi1[i] > 0.0))
      throw DomainError("barrier: phi_1 must be positive on Omega DOFs");
    ratio = std::min(ratio, prm.lambda * w[i] * std::pow(eig.phi1[i], -prm.q) /
                                (eig.lambda1 * mphi[i]));
  }
  b.beta_sub = std::pow(ratio, 1.0 / (1.0 + prm.q));
  b.beta = std::min(b.beta_cap, b.beta_sub);
  b.f = b.beta * eig.phi1;
  return b;
}

const char* branch_name(Branch b) { return b == Branch::plus ? "plus" : "minus"; }

double nehari_residual(const OperatorSet& ops, const GridFunction& u, const PerturbedParams& prm) {
  const Eigen::VectorXd g =
      prm.lambda * power_load(ops, u, -prm.q) + power_load(ops, u, prm.p);
  return (ops.A * u - g).cwiseAbs().maxCoeff();
}

namespace {

GridFunction project(const OperatorSet& ops, const GridFunction& w, const PerturbedParams& prm,
                     Branch branch) {
  const FiberMapReport r = fiber_analyze(ops, w, prm);
  return (branch == Branch::plus ? r.t_star : r.t_star_upper) * w;
}

bool positive_on_omega(const OperatorSet& ops, const GridFunction& u) {
  const Eigen::VectorXd& w = ops.omega_weights();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (w[i] > 0.0 && !(u[i] > 0.0)) return false;
  return true;
}

}  // namespace

NehariRun minimize_nehari(const OperatorSet& ops, const SpdSolver& solver,
                          const PerturbedParams& prm, Branch branch, const GridFunction& seed,
                          const NehariOptions& opt) {
  prm.validate();
  NehariRun run;
  run.branch = branch;
  if (!positive_on_omega(ops, seed)) {
    run.failure = "seed must be positive on Omega";
    return run;
  }
  GridFunction u;
  try {
    u = project(ops, seed, prm, branch);
  } catch (const ProjectionError& e) {
    run.failure = e.what();
    return run;
  }

  double J = J_lambda(ops, u, prm);
  double tau = 1.0;
  for (int it = 0;; ++it) {
    const Eigen::VectorXd g =
        prm.lambda * power_load(ops, u, -prm.q) + power_load(ops, u, prm.p);
    run.residual = (ops.A * u - g).cwiseAbs().maxCoeff();
    run.J_history.push_back(J);
    run.eta_history.push_back(energy_norm(ops, u));
    run.iterations = it;
    if (!std::isfinite(run.residual)) {
      run.failure = "residual blow-up";
      break;
    }
    if (run.residual <= opt.tol) {
      run.converged = true;
      break;
    }
    if (it >= opt.max_iterations) {
      std::ostringstream msg;
      msg << "no convergence after " << it << " iterations (residual " << run.residual << ")";
      run.failure = msg.str();
      break;
    }
    // -A d is the gradient of J at u, so J decreases along d to first order by tau d^T A d.
    const GridFunction d = solver.solve(g, &u) - u;
    const double dad = energy_norm_sq(ops, d);
    tau = std::min(1.0, 2.0 * tau);
    bool accepted = false;
    std::string last_error;
    while (tau > 1e-14) {
      try {
        GridFunction cand = project(ops, u + tau * d, prm, branch);
        const double cj = J_lambda(ops, cand, prm);
        // Near convergence the Armijo decrease drops below the rounding level of J;
        // there a candidate is accepted when it does not raise J beyond rounding
        // and lowers the residual.
        const bool armijo = cj <= J - 1e-4 * tau * dad;
        const bool rounding = !armijo && std::abs(cj - J) <= 1e-12 * std::max(1.0, std::abs(J)) &&
                              nehari_residual(ops, cand, prm) < run.residual;
        if (armijo || rounding) {
          u = std::move(cand);
          J = cj;
          accepted = true;
          break;
        }
      } catch (const ProjectionError& e) {
        last_error = e.what();
      }
      tau *= 0.5;
    }
    if (!accepted) {
      run.failure = last_error.empty() ? "descent stalled above tolerance" : last_error;
      break;
    }
  }
  run.u = u;
  run.J = J;
  run.eta = energy_norm(ops, u);
  run.sup = sup_norm(u);
  run.omega_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (ops.omega_weights()[i] > 0.0) run.omega_min = std::min(run.omega_min, u[i]);
  run.phi_dd_at_one = fiber_second_derivative(fiber_data(ops, u, prm), prm, 1.0);
  if (run.converged && !positive_on_omega(ops, u)) {
    run.converged = false;
    run.failure = "limit not positive on Omega";
  }
  return run;
}

NehariPair nehari_pair(const OperatorSet& ops, const SpdSolver& solver,
                       const PerturbedParams& prm, const GridFunction& seed,
                       const NehariOptions& opt) {
  NehariPair pair;
  pair.plus = minimize_nehari(ops, solver, prm, Branch::plus, seed, opt);
  pair.minus = minimize_nehari(ops, solver, prm, Branch::minus, seed, opt);
  if (pair.plus.u.size() && pair.minus.u.size())
    pair.separation = energy_norm(ops, pair.plus.u - pair.minus.u);
  return pair;
}

Coercivity coercivity_constants(const PerturbedParams& prm, double C_1mq) {
  const double q = prm.q, p = prm.p;
  return {(p - 1.0) / (2.0 * (p + 1.0)), prm.lambda * (p + q) / ((1.0 - q) * (p + 1.0)) * C_1mq};
}

double mu_star(double q, double p, double lambda1, double eps_factor) {
  // max_t [(lambda_1 + eps) t^{1+q} - t^{p+q}], attained at t^{p-1} = (1+q) L / (p+q).
  const double L = lambda1 * (1.0 + eps_factor);
  return (p - 1.0) / (q + 1.0) * std::pow(L * (q + 1.0) / (p + q), (p + q) / (p - 1.0));
}

FinitenessWitness lambda_finiteness_witness(const OperatorSet& ops, const SpdSolver& solver,
                                            double q, double p, const EigenPair& eig,
                                            const NehariOptions& opt) {
  FinitenessWitness w;
  w.mu_star = mu_star(q, p, eig.lambda1);
  w.lambda_tested = 2.0 * w.mu_star;
  const NehariRun run =
      minimize_nehari(ops, solver, PerturbedParams{w.lambda_tested, q, p}, Branch::plus,
                      eig.phi1.cwiseMax(1e-12), opt);
  w.nonexistence_observed = !run.converged;
  w.detail = run.converged ? "converged" : run.failure;
  return w;
}

}  // namespace mixlab
