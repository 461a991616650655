#pragma once

#include "mixlab/domain_mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iosfwd>
#include <utility>
#include <vector>

namespace mixlab {

/// DOF vector of a continuous piecewise-linear function on the window.
/// Entry i is the value at mesh.node_of_dof(i); constrained endpoints are implicit zeros.
using GridFunction = Eigen::VectorXd;

/// Galerkin matrices of the mixed operator on the P1 space of a Mesh.
///
///   a_loc(u,v)  = int_Omega u'v'
///   a_nl(u,v)   = int_Q (u(x)-u(y))(v(x)-v(y)) kappa |x-y|^{-1-2s},  Q = R^2 \ (Omega^c x Omega^c)
///   m_omega(u,v)= int_Omega uv,   m_full(u,v) = int_U uv
///
/// The energy norm is eta(u)^2 = a_loc(u,u) + a_nl(u,u).
struct OperatorSet {
  Mesh mesh;
  int quad_order = 6;
  Eigen::MatrixXd A_loc;
  Eigen::MatrixXd A_nl;
  Eigen::MatrixXd M_omega;
  Eigen::MatrixXd M_full;
  Eigen::MatrixXd A;  // A_loc + A_nl

  std::size_t dofs() const { return mesh.dof_count(); }
  const Eigen::VectorXd& omega_weights() const { return mesh.omega_weights(); }
};

/// Gauss points per element used for a far element pair separated by `gap` elements.
int far_pair_points(int quad_order, std::size_t gap);

OperatorSet assemble(const Mesh& mesh, int quad_order = 6);

double energy_norm_sq(const OperatorSet& ops, const GridFunction& u);
inline double energy_norm(const OperatorSet& ops, const GridFunction& u) {
  return std::sqrt(energy_norm_sq(ops, u));
}
/// A-inner product <u, v>.
double energy_inner(const OperatorSet& ops, const GridFunction& u, const GridFunction& v);

/// kappa * int_Omega (u(x)-u(y)) |x-y|^{-1-2s} dy at collar-interior node `node`,
/// with u replaced by its nodal interpolant (exact integration per element).
double nonlocal_normal_derivative(const Mesh& mesh, const GridFunction& u, std::size_t node);

/// Kernel-weighted average of u over Omega at every collar-interior node, in node order.
/// Only Omega values of `u` are read.
Eigen::VectorXd nonlocal_neumann_reconstruction(const Mesh& mesh, const GridFunction& u);

/// Node indices of the collar interior, matching nonlocal_neumann_reconstruction.
std::vector<std::size_t> collar_nodes(const Mesh& mesh);

/// "row col value" lines (0-based DOF indices), entries with |value| > drop_below.
void write_triplets(std::ostream& out, const Eigen::MatrixXd& m, double drop_below = 0.0);

namespace kernel {

/// int_lo^hi t^e dt for 0 < lo < hi, stable near e = -1.
double power_integral(double lo, double hi, double e);

/// Closed-form element-pair coefficients for identical and touching P1 elements.
/// identical: a_nl restricted to E x E equals  identical_coefficient * h^{1-2s} * [[1,-1],[-1,1]].
double identical_coefficient(double s);

/// touching (shared node): integrals of xi^m eta^n (xi+eta)^{-1-2s} over [0,1]^2,
/// returned as {I20 (= I02), I11}.
std::pair<double, double> touching_moments(double s);

}  // namespace kernel

}  // namespace mixlab
