#include "mixlab/singular_flow.hpp"

#include "mixlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mixlab {

double regularized_primitive(double v, double n, double q) {
  const double vp = std::max(v, 0.0);
  const double vm = std::max(-v, 0.0);
  return std::pow(vp + 1.0 / n, 1.0 - q) / (1.0 - q) - std::pow(n, q) * vm;
}

double regularized_primitive_derivative(double v, double n, double q) {
  if (v < 0.0) return std::pow(n, q);
  return std::pow(v + 1.0 / n, -q);
}

double regularized_functional(const OperatorSet& ops, const GridFunction& v, double n,
                              double q) {
  const Eigen::VectorXd& w = ops.omega_weights();
  double integral = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (w[i] > 0.0) integral += w[i] * regularized_primitive(v[i], n, q);
  // The constrained node x = a carries v = 0 and half an element of weight.
  integral += 0.5 * ops.mesh.h() * regularized_primitive(0.0, n, q);
  return 0.5 * energy_norm_sq(ops, v) - integral;
}

Eigen::VectorXd regularized_load(const OperatorSet& ops, const GridFunction& u, double n,
                                 double q) {
  const Eigen::VectorXd& w = ops.omega_weights();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (w[i] > 0.0) b[i] = w[i] * std::pow(std::max(u[i], 0.0) + 1.0 / n, -q);
  return b;
}

double fixed_point_relaxation(double q) { return 2.0 / (2.0 + q); }

double sup_norm(const GridFunction& u) { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }

double omega_power_integral(const OperatorSet& ops, const GridFunction& u, double alpha) {
  const Eigen::VectorXd& w = ops.omega_weights();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (w[i] > 0.0 && u[i] != 0.0) acc += w[i] * std::pow(std::abs(u[i]), alpha);
  return acc;
}

namespace {

double min_over(const GridFunction& u, const std::vector<std::size_t>& idx) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i : idx) m = std::min(m, u[static_cast<Eigen::Index>(i)]);
  return m;
}

}  // namespace

RegularizedLevel solve_level(const OperatorSet& ops, const SpdSolver& solver, std::int64_t n,
                             double q, const GridFunction& u_init, const LevelOptions& opt,
                             const GridFunction* source) {
  if (n < 1) throw std::invalid_argument("solve_level: n must be >= 1");
  if (!(q > 0.0)) throw std::invalid_argument("solve_level: q must be positive");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_level: tol must be positive");
  if (static_cast<std::size_t>(u_init.size()) != ops.dofs())
    throw std::invalid_argument("solve_level: initial iterate has wrong dimension");
  if (u_init.minCoeff() < 0.0)
    throw std::invalid_argument("solve_level: initial iterate must be nonnegative");

  const double nd = static_cast<double>(n);
  const double theta = fixed_point_relaxation(q);
  Eigen::VectorXd extra;
  if (source) {
    if (source->minCoeff() < 0.0)
      throw std::invalid_argument("solve_level: source must be nonnegative");
    extra = ops.omega_weights().cwiseProduct(*source);
  }

  RegularizedLevel level;
  level.n = n;
  level.q = q;
  GridFunction u = u_init;
  double step = std::numeric_limits<double>::infinity();
  int k = 0;
  while (k < opt.max_outer) {
    Eigen::VectorXd b = regularized_load(ops, u, nd, q);
    if (source) b += extra;
    if (b.minCoeff() < 0.0) throw std::logic_error("solve_level: negative right-hand side");
    const GridFunction t = solver.solve(b, &u);
    GridFunction next = ((1.0 - theta) * u + theta * t).cwiseMax(0.0);
    step = energy_norm(ops, next - u);
    u = std::move(next);
    ++k;
    if (step < opt.tol) break;
  }
  if (!(step < opt.tol)) {
    std::ostringstream msg;
    msg << "solve_level(n=" << n << ", q=" << q << "): fixed point not reached in " << k
        << " iterations (last step " << step << ")";
    throw SolverError(msg.str(), step);
  }

  Eigen::VectorXd b = regularized_load(ops, u, nd, q);
  if (source) b += extra;
  level.weak_residual = (ops.A * u - b).cwiseAbs().maxCoeff();
  level.outer_iterations = k;
  level.energy_sq = energy_norm_sq(ops, u);
  level.sup = sup_norm(u);
  level.omega_min = min_over(u, ops.mesh.middle_half_dofs());
  level.u = std::move(u);
  return level;
}

std::vector<std::int64_t> dyadic_schedule(int max_exponent) {
  std::vector<std::int64_t> out;
  for (int e = 0; e <= max_exponent; ++e) out.push_back(std::int64_t{1} << e);
  return out;
}

SingularLimit run_schedule(const OperatorSet& ops, const SpdSolver& solver, double q,
                           const std::vector<std::int64_t>& schedule, const LevelOptions& opt,
                           const GridFunction* u_init) {
  if (schedule.empty()) throw std::invalid_argument("run_schedule: empty schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1])
      throw std::invalid_argument("run_schedule: schedule must be strictly increasing");

  SingularLimit out;
  out.q = q;
  GridFunction u = u_init ? *u_init : GridFunction::Zero(static_cast<Eigen::Index>(ops.dofs()));
  out.interior_lower_bound = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    try {
      out.levels.push_back(solve_level(ops, solver, schedule[i], q, u, opt));
    } catch (const std::exception& e) {
      out.failed_level = i;
      out.failure = e.what();
      break;
    }
    const RegularizedLevel& cur = out.levels.back();
    out.interior_lower_bound = std::min(out.interior_lower_bound, cur.omega_min);
    if (out.levels.size() >= 2) {
      const RegularizedLevel& prev = out.levels[out.levels.size() - 2];
      out.max_monotonicity_violation =
          std::max(out.max_monotonicity_violation, (prev.u - cur.u).maxCoeff());
      out.max_energy_decrease = std::max(
          out.max_energy_decrease, std::sqrt(prev.energy_sq) - std::sqrt(cur.energy_sq));
    }
    u = cur.u;
  }
  if (!out.levels.empty()) {
    out.u_hat = out.levels.back().u;
    if (q < 1.0)
      out.identity_gap = std::abs(out.levels.back().energy_sq -
                                  omega_power_integral(ops, out.u_hat, 1.0 - q));
  }
  return out;
}

double transformed_energy(const OperatorSet& ops, const GridFunction& u, double q) {
  const GridFunction powered = u.cwiseMax(0.0).array().pow(0.5 * (q + 1.0)).matrix();
  return energy_norm_sq(ops, powered);
}

TransformedBound transformed_energy_bound(const OperatorSet& ops,
                                          const std::vector<RegularizedLevel>& levels, double q,
                                          double slack) {
  if (!(q > 1.0)) throw std::invalid_argument("transformed_energy_bound: requires q > 1");
  TransformedBound out;
  out.bound = (q + 1.0) * (q + 1.0) / (4.0 * q) * ops.mesh.spec().omega_length();
  for (const RegularizedLevel& level : levels)
    out.max_energy = std::max(out.max_energy, transformed_energy(ops, level.u, q));
  out.violated = out.max_energy > out.bound * (1.0 + slack);
  return out;
}

bool algebraic_inequality_check(double x, double y, double alpha) {
  if (x < 0.0 || y < 0.0 || !(alpha > 0.0))
    throw std::invalid_argument("algebraic_inequality_check: need x, y >= 0 and alpha > 0");
  const double lhs = (x - y) * (std::pow(x, alpha) - std::pow(y, alpha));
  const double e = 0.5 * (alpha + 1.0);
  const double d = std::pow(x, e) - std::pow(y, e);
  const double rhs = 4.0 * alpha / ((alpha + 1.0) * (alpha + 1.0)) * d * d;
  return lhs >= rhs - 1e-12 * std::max(1.0, std::abs(lhs));
}

ComparisonResult comparison_check(const OperatorSet& ops, const SpdSolver& solver,
                                  const RegularizedLevel& u, const GridFunction& delta,
                                  double tol, const LevelOptions& opt) {
  if (u.u.minCoeff() <= 0.0)
    throw std::invalid_argument("comparison_check: u must be positive on all DOFs");
  if (delta.minCoeff() < 0.0)
    throw std::invalid_argument("comparison_check: delta must be nonnegative");
  ComparisonResult out;
  out.v = solve_level(ops, solver, u.n, u.q, u.u, opt, &delta).u;
  out.min_margin = (out.v - u.u).minCoeff();
  out.holds = out.min_margin >= -tol;
  return out;
}

}  // namespace mixlab
