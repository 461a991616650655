#include "mixlab/sobolev_lab.hpp"

#include "mixlab/errors.hpp"
#include "mixlab/random_fields.hpp"
#include "mixlab/singular_flow.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mixlab {

namespace {

void require_sublinear(double q, const char* who) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument(std::string(who) + ": q must lie in (0,1)");
}

// With M(v) = 1 the constrained stationarity condition reads v = E A^{-1}(w v^{-q});
// the step is d = E A^{-1}(w v^{-q}) - v.
GridFunction rayleigh_step(const OperatorSet& ops, const SpdSolver& solver, double q,
                           const GridFunction& v, double value) {
  const Eigen::VectorXd& w = ops.omega_weights();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (w[i] > 0.0) b[i] = w[i] * std::pow(v[i], -q);
  return value * solver.solve(b) - v;
}

RayleighRun descend(const OperatorSet& ops, const SpdSolver& solver, double q,
                    const RayleighOptions& opt, GridFunction& v) {
  RayleighRun run;
  v = normalize_to_constraint(ops, v, q);
  double value = energy_norm_sq(ops, v);
  GridFunction d = rayleigh_step(ops, solver, q, v, value);
  double tau = 1.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double dad = energy_norm_sq(ops, d);
    run.iterations = it + 1;
    if (std::sqrt(dad) <= opt.tol * std::sqrt(value)) {
      run.converged = true;
      break;
    }
    tau = std::min(1.0, 2.0 * tau);
    bool accepted = false;
    while (tau > 1e-12) {
      GridFunction cand = normalize_to_constraint(ops, v + tau * d, q);
      const double cv = energy_norm_sq(ops, cand);
      GridFunction cd;
      bool ok = cv <= value - 1e-4 * tau * 2.0 * dad;
      if (!ok && std::abs(cv - value) <= 1e-13 * value) {
        // Decrease below rounding: accept if the stationarity defect shrinks.
        cd = rayleigh_step(ops, solver, q, cand, cv);
        ok = energy_norm_sq(ops, cd) < dad;
      }
      if (ok) {
        v = std::move(cand);
        value = cv;
        d = cd.size() ? std::move(cd) : rayleigh_step(ops, solver, q, v, value);
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) {
      // No sufficient decrease left at machine resolution: treat as stationary.
      run.converged = std::sqrt(dad) <= 1e3 * opt.tol * std::sqrt(value);
      break;
    }
  }
  run.value = value;
  return run;
}

}  // namespace

double constant_from_limit(const OperatorSet& ops, const GridFunction& u_hat, double q) {
  require_sublinear(q, "constant_from_limit");
  const double eta = energy_norm(ops, u_hat);
  if (!(eta > 0.0)) throw DomainError("constant_from_limit: u_hat has zero energy");
  return std::pow(eta, -(2.0 + 2.0 * q) / (1.0 - q));
}

GridFunction normalize_to_constraint(const OperatorSet& ops, const GridFunction& v, double q) {
  require_sublinear(q, "normalize_to_constraint");
  const double m = omega_power_integral(ops, v, 1.0 - q);
  if (!(m > 0.0)) throw DomainError("normalize_to_constraint: v vanishes on Omega");
  return v * std::pow(m, -1.0 / (1.0 - q));
}

GridFunction extremal_from_limit(const OperatorSet& ops, const GridFunction& u_hat, double q) {
  return normalize_to_constraint(ops, u_hat, q);
}

RayleighResult constant_by_rayleigh(const OperatorSet& ops, const SpdSolver& solver, double q,
                                    const RayleighOptions& opt,
                                    const GridFunction* seed_vector) {
  require_sublinear(q, "constant_by_rayleigh");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("constant_by_rayleigh: tol must be positive");
  RayleighResult out;
  out.value = std::numeric_limits<double>::infinity();
  auto consider = [&](GridFunction v, std::uint64_t seed) {
    RayleighRun run = descend(ops, solver, q, opt, v);
    run.seed = seed;
    if (run.converged && run.value < out.value) {
      out.value = run.value;
      out.argmin = v;
    }
    out.runs.push_back(run);
  };
  for (int k = 0; k < opt.random_starts; ++k) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(k);
    consider(random_positive(ops.dofs(), seed), seed);
  }
  if (seed_vector) {
    if (seed_vector->minCoeff() <= 0.0)
      throw std::invalid_argument("constant_by_rayleigh: seed vector must be positive");
    consider(*seed_vector, 0);
  }
  if (out.argmin.size() == 0)
    throw SolverError("constant_by_rayleigh: no start converged", out.runs.back().value);
  return out;
}

InequalitySides inequality_sides(const OperatorSet& ops, double q, double C,
                                 const GridFunction& v) {
  require_sublinear(q, "inequality_sides");
  InequalitySides s;
  s.lhs = energy_norm_sq(ops, v);
  s.rhs = C * std::pow(omega_power_integral(ops, v, 1.0 - q), 2.0 / (1.0 - q));
  return s;
}

bool verify_inequality(const OperatorSet& ops, double q, double C, const GridFunction& v) {
  const InequalitySides s = inequality_sides(ops, q, C, v);
  return s.lhs >= s.rhs * (1.0 - 1e-9);
}

double energy_cosine(const OperatorSet& ops, const GridFunction& u, const GridFunction& v) {
  return energy_inner(ops, u, v) / (energy_norm(ops, u) * energy_norm(ops, v));
}

SobolevReport sobolev_report(const OperatorSet& ops, const SpdSolver& solver,
                             const GridFunction& u_hat, double q, const RayleighOptions& opt,
                             int random_tests) {
  SobolevReport r;
  r.q = q;
  r.R_formula = constant_from_limit(ops, u_hat, q);
  r.extremal_V = extremal_from_limit(ops, u_hat, q);
  const GridFunction seed = r.extremal_V.cwiseMax(1e-300);
  RayleighResult ray = constant_by_rayleigh(ops, solver, q, opt, &seed);
  r.R_rayleigh = ray.value;
  r.rayleigh_argmin = ray.argmin;
  r.equality_gap = std::abs(r.R_rayleigh - r.R_formula) / r.R_formula;
  r.argmin_distance = energy_norm(ops, r.rayleigh_argmin - r.extremal_V);

  const double C = r.R_formula * (1.0 - 1e-6);
  r.random_tests = random_tests;
  for (int k = 0; k < random_tests; ++k) {
    const GridFunction v = random_signed(ops.dofs(), opt.seed * 7919u + static_cast<std::uint64_t>(k));
    if (!verify_inequality(ops, q, C, v)) ++r.random_test_failures;
  }
  r.sharpness_witness = !verify_inequality(ops, q, 1.05 * r.R_formula, r.extremal_V);
  return r;
}

}  // namespace mixlab
