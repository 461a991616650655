#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace mixlab {

// One-dimensional window [a, b+w]:
//   Omega = (a, b), Neumann collar N = (b, b+w),
//   Dirichlet exterior D = (-inf, a] u [b+w, inf).
struct DomainSpec {
  double a = 0.0;
  double b = 1.0;
  double collar_width = 0.5;
  double s = 0.5;
  double h = 1.0 / 64.0;
  double kernel_constant = 1.0;

  double omega_length() const { return b - a; }
  double window_end() const { return b + collar_width; }

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

enum class Region {
  dirichlet_left,   // x = a, constrained to zero
  omega_interior,   // a < x < b
  neumann_point,    // x = b, natural boundary condition
  collar_interior,  // b < x < b+w
  dirichlet_right,  // x = b+w, constrained to zero
};

const char* region_name(Region r);

class Mesh {
 public:
  explicit Mesh(const DomainSpec& spec);

  const DomainSpec& spec() const { return spec_; }
  double h() const { return spec_.h; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t element_count() const { return nodes_.size() - 1; }
  std::size_t dof_count() const { return nodes_.size() - 2; }

  double node(std::size_t k) const { return nodes_[k]; }
  const std::vector<double>& nodes() const { return nodes_; }
  Region region(std::size_t k) const { return regions_[k]; }

  /// Node index of x = b.
  std::size_t neumann_node() const { return neumann_node_; }

  /// DOF of node k, or nullopt for the two constrained endpoints.
  std::optional<std::size_t> dof(std::size_t k) const {
    if (k == 0 || k + 1 >= nodes_.size()) return std::nullopt;
    return k - 1;
  }
  std::size_t node_of_dof(std::size_t i) const { return i + 1; }
  double dof_coordinate(std::size_t i) const { return nodes_[i + 1]; }
  Region dof_region(std::size_t i) const { return regions_[i + 1]; }

  /// Element k spans [node(k), node(k+1)]; it lies in Omega or in the collar.
  bool element_in_omega(std::size_t k) const { return k < neumann_node_; }

  /// Lumped Omega weights  w_i = int_Omega phi_i  (h inside, h/2 at x=b, 0 on the collar).
  const Eigen::VectorXd& omega_weights() const { return omega_weights_; }

  /// DOFs in the compact sub-grid [a + (b-a)/4, b - (b-a)/4].
  std::vector<std::size_t> middle_half_dofs() const;

  /// Nodal values including the zero-constrained endpoints.
  Eigen::VectorXd to_nodal(const Eigen::VectorXd& dofs) const;

  /// Piecewise-linear interpolant of DOF values at an arbitrary x (zero outside the window).
  double evaluate(const Eigen::VectorXd& dofs, double x) const;

 private:
  DomainSpec spec_;
  std::vector<double> nodes_;
  std::vector<Region> regions_;
  std::size_t neumann_node_ = 0;
  Eigen::VectorXd omega_weights_;
};

Mesh build_mesh(const DomainSpec& spec);

/// kappa * [ (x-a)^{-2s} + (b+w-x)^{-2s} ] / (2s):
/// the integral of kappa |x-y|^{-1-2s} over the Dirichlet exterior, for x in Omega.
double dirichlet_tail_weight(double x, const DomainSpec& spec);

}  // namespace mixlab
