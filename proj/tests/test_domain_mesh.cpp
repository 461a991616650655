#include "doctest.h"

#include "mixlab/domain_mesh.hpp"
#include "mixlab/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <string>

using namespace mixlab;

namespace {
DomainSpec spec(double a, double b, double w, double h) {
  DomainSpec d;
  d.a = a;
  d.b = b;
  d.collar_width = w;
  d.h = h;
  return d;
}
}  // namespace

TEST_SUITE("domain_mesh") {
  TEST_CASE("quarter spacing gives seven nodes and five dofs") {
    const Mesh m = build_mesh(spec(0, 1, 0.5, 0.25));
    REQUIRE(m.node_count() == 7);
    CHECK(m.dof_count() == 5);
    const double expected[] = {0, .25, .5, .75, 1, 1.25, 1.5};
    for (std::size_t k = 0; k < 7; ++k) CHECK(m.node(k) == doctest::Approx(expected[k]));
    CHECK_FALSE(m.dof(0).has_value());
    CHECK_FALSE(m.dof(6).has_value());
    for (std::size_t k = 1; k < 6; ++k) CHECK(*m.dof(k) == k - 1);
  }

  TEST_CASE("misaligned spacing is rejected with a divisibility message") {
    try {
      build_mesh(spec(0, 1, 0.5, 0.3));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("does not divide") != std::string::npos);
    }
  }

  TEST_CASE("right end of omega is the neumann point and carries a dof") {
    const Mesh m = build_mesh(spec(0, 2, 1, 0.5));
    std::size_t k = 0;
    while (m.node(k) < 2.0 - 1e-12) ++k;
    CHECK(m.node(k) == doctest::Approx(2.0));
    CHECK(m.region(k) == Region::neumann_point);
    CHECK(m.dof(k).has_value());
    CHECK(m.neumann_node() == k);
  }

  TEST_CASE("regions partition the nodes") {
    for (double h : {0.25, 1.0 / 16, 1.0 / 128}) {
      const Mesh m = build_mesh(spec(0, 1, 0.5, h));
      std::map<Region, std::size_t> count;
      for (std::size_t k = 0; k < m.node_count(); ++k) ++count[m.region(k)];
      const auto n_omega = static_cast<std::size_t>(1.0 / h);
      const auto n_collar = static_cast<std::size_t>(0.5 / h);
      CHECK(count[Region::dirichlet_left] == 1);
      CHECK(count[Region::dirichlet_right] == 1);
      CHECK(count[Region::neumann_point] == 1);
      CHECK(count[Region::omega_interior] == n_omega - 1);
      CHECK(count[Region::collar_interior] == n_collar - 1);
      CHECK(m.dof_count() == count[Region::omega_interior] + 1 + count[Region::collar_interior]);
      for (std::size_t k = 1; k < m.node_count(); ++k)
        CHECK(m.node(k) - m.node(k - 1) == doctest::Approx(h).epsilon(1e-12));
    }
  }

  TEST_CASE("invalid geometry is rejected") {
    CHECK_THROWS_AS(build_mesh(spec(1, 0, 0.5, 0.25)), ConfigError);
    CHECK_THROWS_AS(build_mesh(spec(0, 1, 0, 0.25)), ConfigError);
    DomainSpec d = spec(0, 1, 0.5, 0.25);
    d.s = 1.0;
    CHECK_THROWS_AS(build_mesh(d), ConfigError);
    d.s = 0.5;
    d.kernel_constant = 0.0;
    CHECK_THROWS_AS(build_mesh(d), ConfigError);
  }

  TEST_CASE("lumped omega weights") {
    const Mesh m = build_mesh(spec(0, 1, 0.5, 0.25));
    const Eigen::VectorXd& w = m.omega_weights();
    CHECK(w[0] == doctest::Approx(0.25));
    CHECK(w[2] == doctest::Approx(0.25));
    CHECK(w[3] == doctest::Approx(0.125));  // x = b
    CHECK(w[4] == 0.0);
    CHECK(w.sum() == doctest::Approx(0.875));  // |Omega| minus the half cell at x = a
  }

  TEST_CASE("middle half sub-grid") {
    const Mesh m = build_mesh(spec(0, 1, 0.5, 1.0 / 8));
    for (std::size_t i : m.middle_half_dofs()) {
      CHECK(m.dof_coordinate(i) >= 0.25 - 1e-12);
      CHECK(m.dof_coordinate(i) <= 0.75 + 1e-12);
    }
    CHECK(m.middle_half_dofs().size() == 5);
  }

  TEST_CASE("interpolation and nodal expansion") {
    const Mesh m = build_mesh(spec(0, 1, 0.5, 0.25));
    Eigen::VectorXd u(5);
    u << 1, 2, 3, 4, 5;
    const Eigen::VectorXd nodal = m.to_nodal(u);
    CHECK(nodal.size() == 7);
    CHECK(nodal[0] == 0.0);
    CHECK(nodal[6] == 0.0);
    CHECK(m.evaluate(u, 0.375) == doctest::Approx(1.5));
    CHECK(m.evaluate(u, 0.125) == doctest::Approx(0.5));
    CHECK(m.evaluate(u, 2.0) == 0.0);
    CHECK(m.evaluate(u, -1.0) == 0.0);
  }

  TEST_CASE("tail weight closed form") {
    DomainSpec d = spec(0, 1, 0.5, 0.25);
    // int_{-inf}^0 (0.5-y)^{-2} dy + int_{1.5}^inf (y-0.5)^{-2} dy = 2 + 1
    CHECK(dirichlet_tail_weight(0.5, d) == doctest::Approx(3.0).epsilon(1e-14));
    d.kernel_constant = 2.5;
    CHECK(dirichlet_tail_weight(0.5, d) == doctest::Approx(7.5).epsilon(1e-14));
  }

  TEST_CASE("tail weight is symmetric about the window midpoint") {
    // Window [0, 1.5] with Omega = (0, 1.2): x and 1.5 - x are both in Omega.
    DomainSpec d = spec(0, 1.2, 0.3, 0.1);
    for (double x : {0.35, 0.5, 0.7}) {
      CHECK(dirichlet_tail_weight(x, d) ==
            doctest::Approx(dirichlet_tail_weight(d.window_end() - x, d)).epsilon(1e-14));
    }
  }

  TEST_CASE("tail weight decreases as the collar widens") {
    for (double s : {0.1, 0.5, 0.9}) {
      double previous = 1e300;
      for (double w : {0.25, 0.5, 1.0, 2.0}) {
        DomainSpec d = spec(0, 1, w, 0.25);
        d.s = s;
        const double v = dirichlet_tail_weight(0.6, d);
        CHECK(v < previous);
        previous = v;
      }
    }
  }

  TEST_CASE("tail weight matches a direct quadrature of the kernel") {
    DomainSpec d = spec(0, 1, 0.5, 0.25);
    boost::math::quadrature::exp_sinh<double> integrator;
    for (double s : {0.2, 0.5, 0.8}) {
      d.s = s;
      for (double x : {0.1, 0.4, 0.9}) {
        auto kernel = [&](double t) { return std::pow(t, -1.0 - 2.0 * s); };
        // Distances to the left exterior start at x-a, to the right one at b+w-x.
        const double direct = integrator.integrate(kernel, x - d.a, std::numeric_limits<double>::infinity()) +
                              integrator.integrate(kernel, d.window_end() - x, std::numeric_limits<double>::infinity());
        CHECK(dirichlet_tail_weight(x, d) == doctest::Approx(direct).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("tail weight outside omega is a domain error") {
    const DomainSpec d = spec(0, 1, 0.5, 0.25);
    CHECK_THROWS_AS(dirichlet_tail_weight(0.0, d), DomainError);
    CHECK_THROWS_AS(dirichlet_tail_weight(1.0, d), DomainError);
    CHECK_THROWS_AS(dirichlet_tail_weight(1.2, d), DomainError);
  }

  TEST_CASE("tail weights do not depend on the mesh") {
    DomainSpec coarse = spec(0, 1, 0.5, 1.0 / 8);
    DomainSpec fine = spec(0, 1, 0.5, 1.0 / 64);
    for (double x : {0.125, 0.5, 0.875}) CHECK(dirichlet_tail_weight(x, coarse) == dirichlet_tail_weight(x, fine));
  }
}
