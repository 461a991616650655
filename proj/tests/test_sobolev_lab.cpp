#include "doctest.h"

#include "mixlab/random_fields.hpp"
#include "mixlab/singular_flow.hpp"
#include "mixlab/sobolev_lab.hpp"

#include <cmath>

using namespace mixlab;

namespace {

struct Setup {
  OperatorSet ops;
  SpdSolver solver;
  explicit Setup(double h) : ops(assemble(build_mesh([h] {
                               DomainSpec d;
                               d.h = h;
                               return d;
                             }()))),
                             solver(ops.A, SolverKind::cholesky) {}
  GridFunction u_hat(double q) const {
    const SingularLimit lim = run_schedule(ops, solver, q, dyadic_schedule(30), LevelOptions{1e-12, 5000});
    REQUIRE(lim.ok());
    return lim.u_hat;
  }
};

const Setup& s128() {
  static const Setup s(1.0 / 128);
  return s;
}

}  // namespace

TEST_SUITE("sobolev_lab") {
  TEST_CASE("constant from a synthetic limit") {
    const Setup& s = s128();
    GridFunction u = random_positive(s.ops.dofs(), 4);
    u *= 2.0 / energy_norm(s.ops, u);  // eta(u)^2 = 4
    CHECK(constant_from_limit(s.ops, u, 0.5) == doctest::Approx(0.015625).epsilon(1e-12));
    for (double q : {0.3, 0.5, 0.9}) {
      const double ratio = constant_from_limit(s.ops, 2.0 * u, q) / constant_from_limit(s.ops, u, q);
      CHECK(ratio == doctest::Approx(std::pow(2.0, -(2.0 + 2.0 * q) / (1.0 - q))).epsilon(1e-12));
    }
  }

  TEST_CASE("preconditions") {
    const Setup& s = s128();
    const GridFunction u = random_positive(s.ops.dofs(), 1);
    CHECK_THROWS(constant_from_limit(s.ops, u, 1.5));
    CHECK_THROWS(constant_from_limit(s.ops, u, 0.0));
    CHECK_THROWS(constant_by_rayleigh(s.ops, s.solver, 1.0, RayleighOptions{}, nullptr));
  }

  TEST_CASE("extremal energy equals the formula constant") {
    const Setup& s = s128();
    for (double q : {0.3, 0.5, 0.9}) {
      const GridFunction u = s.u_hat(q);
      const GridFunction V = extremal_from_limit(s.ops, u, q);
      CHECK(omega_power_integral(s.ops, V, 1.0 - q) == doctest::Approx(1.0).epsilon(1e-13));
      CHECK(energy_norm_sq(s.ops, V) == doctest::Approx(constant_from_limit(s.ops, u, q)).epsilon(1e-7));
    }
  }

  TEST_CASE("rayleigh minimum lies below random constraint points") {
    const Setup& s = s128();
    const double q = 0.5;
    RayleighOptions ro;
    ro.seed = 3;
    const RayleighResult r = constant_by_rayleigh(s.ops, s.solver, q, ro, nullptr);
    CHECK(r.runs.size() == 5);
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const GridFunction w = normalize_to_constraint(s.ops, random_signed(s.ops.dofs(), 1000 + seed), q);
      CHECK(r.value <= energy_norm_sq(s.ops, w));
    }
    CHECK(omega_power_integral(s.ops, r.argmin, 1.0 - q) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.argmin.minCoeff() >= 0.0);
  }

  TEST_CASE("formula and minimization agree on the finer mesh") {
    const Setup s(1.0 / 256);
    for (double q : {0.3, 0.5, 0.9}) {
      const SobolevReport rep = sobolev_report(s.ops, s.solver, s.u_hat(q), q, RayleighOptions{}, 1000);
      CHECK(rep.equality_gap <= 0.01);
      CHECK(rep.argmin_distance <= 1e-3);
      CHECK(rep.random_test_failures == 0);
      CHECK(rep.sharpness_witness);
    }
  }

  TEST_CASE("rayleigh without the extremal seed finds the same constant") {
    const Setup& s = s128();
    const double q = 0.9;
    const double R = constant_from_limit(s.ops, s.u_hat(q), q);
    const RayleighResult r = constant_by_rayleigh(s.ops, s.solver, q, RayleighOptions{}, nullptr);
    CHECK(std::abs(r.value - R) <= 0.01 * R);
    const GridFunction V = extremal_from_limit(s.ops, s.u_hat(q), q);
    CHECK(energy_norm(s.ops, r.argmin - V) <= 1e-3);
  }

  TEST_CASE("inequality checks") {
    const Setup& s = s128();
    const double q = 0.5;
    const GridFunction u = s.u_hat(q);
    const double R = constant_from_limit(s.ops, u, q);
    CHECK(verify_inequality(s.ops, q, R, GridFunction::Zero(u.size())));
    for (std::uint64_t seed = 1; seed <= 1000; ++seed)
      CHECK(verify_inequality(s.ops, q, R * (1.0 - 1e-6), random_signed(s.ops.dofs(), seed)));
    const GridFunction V = extremal_from_limit(s.ops, u, q);
    CHECK_FALSE(verify_inequality(s.ops, q, 1.05 * R, V));
    const InequalitySides sides = inequality_sides(s.ops, q, R, V);
    CHECK(sides.lhs == doctest::Approx(sides.rhs).epsilon(1e-7));
  }

  TEST_CASE("absolute value lowers the energy") {
    const Setup& s = s128();
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      const GridFunction v = random_signed(s.ops.dofs(), seed);
      CHECK(energy_norm_sq(s.ops, v.cwiseAbs()) <= energy_norm_sq(s.ops, v) * (1.0 + 1e-12));
    }
  }

  TEST_CASE("equality cases are multiples of the extremal") {
    const Setup& s = s128();
    const double q = 0.3;
    const GridFunction u = s.u_hat(q);
    const double R = constant_from_limit(s.ops, u, q);
    const GridFunction V = extremal_from_limit(s.ops, u, q);
    for (double k : {0.1, 2.0, 17.0}) {
      const InequalitySides sides = inequality_sides(s.ops, q, R, k * V);
      CHECK(std::abs(sides.lhs - sides.rhs) <= 1e-6 * sides.lhs);
      CHECK(energy_cosine(s.ops, k * V, V) > 1.0 - 1e-6);
    }
    RayleighOptions ro;
    ro.seed = 21;
    const RayleighResult r = constant_by_rayleigh(s.ops, s.solver, q, ro, nullptr);
    CHECK(energy_cosine(s.ops, r.argmin, V) > 1.0 - 1e-6);
  }

  TEST_CASE("gap does not grow under refinement") {
    auto gap = [](double h) {
      const Setup s(h);
      return sobolev_report(s.ops, s.solver, s.u_hat(0.5), 0.5, RayleighOptions{}, 0).equality_gap;
    };
    const double g0 = gap(1.0 / 64), g1 = gap(1.0 / 128);
    CHECK((g1 <= g0 || (g0 <= 1e-6 && g1 <= 1e-6)));
  }
}
