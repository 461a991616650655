#include "mixlab/operators.hpp"

#include "mixlab/errors.hpp"
#include "mixlab/quadrature.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mixlab {

namespace kernel {

double power_integral(double lo, double hi, double e) {
  // lo^{e+1} * (r^{e+1} - 1) / (e+1),  r = hi/lo
  const double eps = e + 1.0;
  const double log_r = std::log(hi / lo);
  const double x = eps * log_r;
  double ratio;  // (r^{eps} - 1)/eps
  if (std::abs(x) < 1e-8)
    ratio = log_r * (1.0 + 0.5 * x);
  else
    ratio = std::expm1(x) / eps;
  return std::pow(lo, eps) * ratio;
}

double identical_coefficient(double s) {
  // int_0^1 int_0^1 |x-y|^{1-2s} = 2 / ((2-2s)(3-2s))
  return 2.0 / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
}

std::pair<double, double> touching_moments(double s) {
  // Split [0,1]^2 along the diagonal and use polar-like coordinates
  // (xi, eta) = (rho, rho*tau) and (rho*tau, rho). The radial integral is
  // int_0^1 rho^{2-2s} drho = 1/(3-2s); the angular parts are
  // J_k = int_0^1 tau^k (1+tau)^{-1-2s} dtau = int_1^2 (w-1)^k w^{-1-2s} dw.
  const double j0 = power_integral(1.0, 2.0, -1.0 - 2.0 * s);
  const double l1 = power_integral(1.0, 2.0, -2.0 * s);
  const double l2 = power_integral(1.0, 2.0, 1.0 - 2.0 * s);
  const double j1 = l1 - j0;
  const double j2 = l2 - 2.0 * l1 + j0;
  const double radial = 1.0 / (3.0 - 2.0 * s);
  return {(j0 + j2) * radial, 2.0 * j1 * radial};
}

}  // namespace kernel

int far_pair_points(int quad_order, std::size_t gap) {
  if (gap <= 1) return 3 * quad_order;
  if (gap <= 3) return 2 * quad_order;
  return quad_order;
}

namespace {

class Assembler {
 public:
  explicit Assembler(const Mesh& mesh) : mesh_(mesh) {}

  void add(Eigen::MatrixXd& m, std::size_t node_i, std::size_t node_j, double v) const {
    const auto di = mesh_.dof(node_i);
    const auto dj = mesh_.dof(node_j);
    if (di && dj) m(static_cast<Eigen::Index>(*di), static_cast<Eigen::Index>(*dj)) += v;
  }

  template <std::size_t N>
  void add_local(Eigen::MatrixXd& m, const std::array<std::size_t, N>& nodes,
                 const std::array<std::array<double, N>, N>& local) const {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) add(m, nodes[i], nodes[j], local[i][j]);
  }

 private:
  const Mesh& mesh_;
};

void assemble_local_and_mass(const Mesh& mesh, const Assembler& as, OperatorSet& ops) {
  const double h = mesh.h();
  for (std::size_t k = 0; k < mesh.element_count(); ++k) {
    const std::array<std::size_t, 2> nodes{k, k + 1};
    const std::array<std::array<double, 2>, 2> mass{{{h / 3.0, h / 6.0}, {h / 6.0, h / 3.0}}};
    as.add_local(ops.M_full, nodes, mass);
    if (!mesh.element_in_omega(k)) continue;
    const std::array<std::array<double, 2>, 2> stiff{{{1.0 / h, -1.0 / h}, {-1.0 / h, 1.0 / h}}};
    as.add_local(ops.A_loc, nodes, stiff);
    as.add_local(ops.M_omega, nodes, mass);
  }
}

// 2 * int_e phi_i phi_j T(x) dx on every Omega element, T = dirichlet_tail_weight.
// The (x-a)^{-2s} singularity on the first element is integrated exactly; the
// remaining weights are smooth on each element and a 16-point rule is exact to
// rounding.
void assemble_dirichlet_tails(const Mesh& mesh, const Assembler& as, Eigen::MatrixXd& a_nl) {
  const DomainSpec& spec = mesh.spec();
  const double h = mesh.h();
  const double two_s = 2.0 * spec.s;
  const double kappa = spec.kernel_constant;
  const QuadratureRule& rule = gauss_legendre(16);

  for (std::size_t k = 0; k < mesh.neumann_node(); ++k) {
    std::array<std::array<double, 2>, 2> local{};
    const double x0 = mesh.node(k);

    // right exterior (b+w, inf): distance >= collar width, always smooth
    // left exterior (-inf, a): smooth unless the element touches x = a
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double sigma = rule.points[q];
      const double x = x0 + sigma * h;
      double weight = std::pow(spec.window_end() - x, -two_s);
      if (k > 0) weight += std::pow(x - spec.a, -two_s);
      weight *= kappa / two_s * rule.weights[q] * h;
      const std::array<double, 2> phi{1.0 - sigma, sigma};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) local[i][j] += 2.0 * weight * phi[i] * phi[j];
    }
    if (k == 0) {
      // int_0^h phi_i phi_j t^{-2s} dt with t = h*sigma: moments 1/(j+1-2s)
      const double m0 = 1.0 / (1.0 - two_s), m1 = 1.0 / (2.0 - two_s), m2 = 1.0 / (3.0 - two_s);
      const double scale = 2.0 * kappa / two_s * std::pow(h, 1.0 - two_s);
      local[0][0] += scale * (m0 - 2.0 * m1 + m2);
      local[0][1] += scale * (m1 - m2);
      local[1][0] += scale * (m1 - m2);
      local[1][1] += scale * m2;
    }
    as.add_local(a_nl, std::array<std::size_t, 2>{k, k + 1}, local);
  }
}

void assemble_gagliardo(const Mesh& mesh, int quad_order, const Assembler& as,
                        Eigen::MatrixXd& a_nl) {
  const DomainSpec& spec = mesh.spec();
  const double h = mesh.h();
  const double s = spec.s;
  const double kappa = spec.kernel_constant;
  const double beta = 1.0 + 2.0 * s;
  const double h_scale = kappa * std::pow(h, 1.0 - 2.0 * s);
  const std::size_t n_el = mesh.element_count();

  // E x E
  const double c_id = h_scale * kernel::identical_coefficient(s);
  for (std::size_t k = 0; k < mesh.neumann_node(); ++k)
    as.add_local(a_nl, std::array<std::size_t, 2>{k, k + 1},
                 std::array<std::array<double, 2>, 2>{{{c_id, -c_id}, {-c_id, c_id}}});

  // E x F and F x E for elements sharing node k+1. With xi = x_{k+1} - x and
  // eta = y - x_{k+1},  u(x) - u(y) = -(a xi + b eta)  where a, b are the slopes
  // on the two elements, so the pair form is a quadratic in the slopes with
  // moments I20 = I02 and I11 of the kernel (xi+eta)^{-1-2s}.
  const auto [i20, i11] = kernel::touching_moments(s);
  const std::array<double, 3> alpha{-1.0, 1.0, 0.0};
  const std::array<double, 3> beta_v{0.0, -1.0, 1.0};
  for (std::size_t k = 0; k + 1 < n_el; ++k) {
    if (!mesh.element_in_omega(k) && !mesh.element_in_omega(k + 1)) continue;
    std::array<std::array<double, 3>, 3> local{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        local[i][j] = 2.0 * h_scale *
                      (i20 * (alpha[i] * alpha[j] + beta_v[i] * beta_v[j]) +
                       i11 * (alpha[i] * beta_v[j] + beta_v[i] * alpha[j]));
    as.add_local(a_nl, std::array<std::size_t, 3>{k, k + 1, k + 2}, local);
  }

  // Separated pairs: tensor Gauss rule, both orderings.
  for (std::size_t k = 0; k < n_el; ++k) {
    for (std::size_t l = k + 2; l < n_el; ++l) {
      if (!mesh.element_in_omega(k) && !mesh.element_in_omega(l)) continue;
      const QuadratureRule& rule = gauss_legendre(far_pair_points(quad_order, l - k - 1));
      const std::size_t nq = rule.points.size();
      const double x0 = mesh.node(k);
      const double y0 = mesh.node(l);
      std::array<std::array<double, 4>, 4> local{};
      for (std::size_t p = 0; p < nq; ++p) {
        const double xi = rule.points[p];
        const double x = x0 + xi * h;
        const std::array<double, 2> px{1.0 - xi, xi};
        for (std::size_t q = 0; q < nq; ++q) {
          const double zeta = rule.points[q];
          const double y = y0 + zeta * h;
          const double w = 2.0 * kappa * rule.weights[p] * rule.weights[q] * h * h *
                           std::exp(-beta * std::log(y - x));
          const std::array<double, 4> d{px[0], px[1], -(1.0 - zeta), -zeta};
          for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) local[i][j] += w * d[i] * d[j];
        }
      }
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) local[i][j] = local[j][i];
      as.add_local(a_nl, std::array<std::size_t, 4>{k, k + 1, l, l + 1}, local);
    }
  }
}

void check_dims(const OperatorSet& ops, const GridFunction& u) {
  if (static_cast<std::size_t>(u.size()) != ops.dofs()) {
    std::ostringstream msg;
    msg << "grid function has " << u.size() << " entries, operator set has " << ops.dofs()
        << " DOFs";
    throw std::invalid_argument(msg.str());
  }
}

// int_e u(y) k(x-y) dy and int_e k(x-y) dy for x to the right of element e = [y0, y1].
std::pair<double, double> element_kernel_integrals(double x, double y0, double y1, double u0,
                                                   double u1, double s) {
  const double t_lo = x - y1;
  const double t_hi = x - y0;
  const double p0 = kernel::power_integral(t_lo, t_hi, -1.0 - 2.0 * s);
  const double p1 = kernel::power_integral(t_lo, t_hi, -2.0 * s);
  const double slope = (u1 - u0) / (y1 - y0);
  // u(y) = u0 + slope (y - y0) = u0 + slope ((x - y0) - t)
  const double weighted = (u0 + slope * (x - y0)) * p0 - slope * p1;
  return {weighted, p0};
}

}  // namespace

OperatorSet assemble(const Mesh& mesh, int quad_order) {
  if (quad_order < 2) throw ConfigError("assemble: quad_order must be >= 2");
  const auto n = static_cast<Eigen::Index>(mesh.dof_count());
  OperatorSet ops{mesh, quad_order, Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
                  Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
                  Eigen::MatrixXd()};
  const Assembler as(mesh);
  assemble_local_and_mass(mesh, as, ops);
  assemble_gagliardo(mesh, quad_order, as, ops.A_nl);
  assemble_dirichlet_tails(mesh, as, ops.A_nl);
  ops.A = ops.A_loc + ops.A_nl;
  return ops;
}

double energy_norm_sq(const OperatorSet& ops, const GridFunction& u) {
  check_dims(ops, u);
  return std::max(0.0, u.dot(ops.A * u));
}

double energy_inner(const OperatorSet& ops, const GridFunction& u, const GridFunction& v) {
  check_dims(ops, u);
  check_dims(ops, v);
  return u.dot(ops.A * v);
}

std::vector<std::size_t> collar_nodes(const Mesh& mesh) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < mesh.node_count(); ++k)
    if (mesh.region(k) == Region::collar_interior) out.push_back(k);
  return out;
}

namespace {

std::pair<double, double> omega_kernel_integrals(const Mesh& mesh, const GridFunction& u,
                                                 double x) {
  const Eigen::VectorXd nodal = mesh.to_nodal(u);
  double weighted = 0.0, total = 0.0;
  for (std::size_t k = 0; k < mesh.neumann_node(); ++k) {
    const auto [wu, w1] =
        element_kernel_integrals(x, mesh.node(k), mesh.node(k + 1),
                                 nodal[static_cast<Eigen::Index>(k)],
                                 nodal[static_cast<Eigen::Index>(k + 1)], mesh.spec().s);
    weighted += wu;
    total += w1;
  }
  return {weighted, total};
}

}  // namespace

double nonlocal_normal_derivative(const Mesh& mesh, const GridFunction& u, std::size_t node) {
  if (node >= mesh.node_count() || mesh.region(node) != Region::collar_interior) {
    std::ostringstream msg;
    msg << "nonlocal_normal_derivative: node " << node << " is not in the collar interior";
    throw DomainError(msg.str());
  }
  const double x = mesh.node(node);
  const auto [weighted, total] = omega_kernel_integrals(mesh, u, x);
  const double ux = u[static_cast<Eigen::Index>(*mesh.dof(node))];
  return mesh.spec().kernel_constant * (ux * total - weighted);
}

Eigen::VectorXd nonlocal_neumann_reconstruction(const Mesh& mesh, const GridFunction& u) {
  const auto nodes = collar_nodes(mesh);
  Eigen::VectorXd out(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto [weighted, total] = omega_kernel_integrals(mesh, u, mesh.node(nodes[i]));
    out[static_cast<Eigen::Index>(i)] = weighted / total;
  }
  return out;
}

void write_triplets(std::ostream& out, const Eigen::MatrixXd& m, double drop_below) {
  const auto old_precision = out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > drop_below) out << i << ' ' << j << ' ' << m(i, j) << '\n';
  out.precision(old_precision);
}

}  // namespace mixlab
