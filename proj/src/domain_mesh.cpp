#include "mixlab/domain_mesh.hpp"

#include "mixlab/errors.hpp"

#include <cmath>
#include <sstream>

namespace mixlab {

namespace {

// Number of h-steps in `length`, or nullopt if h does not divide it.
std::optional<std::size_t> steps_in(double length, double h) {
  const double ratio = length / h;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    return std::nullopt;
  return static_cast<std::size_t>(rounded);
}

}  // namespace

void DomainSpec::validate() const {
  std::ostringstream msg;
  if (!(a < b)) {
    msg << "domain: need a < b (got a=" << a << ", b=" << b << ")";
    throw ConfigError(msg.str());
  }
  if (!(collar_width > 0.0)) {
    msg << "domain: collar_width must be positive (got " << collar_width << ")";
    throw ConfigError(msg.str());
  }
  if (!(s > 0.0 && s < 1.0)) {
    msg << "domain: fractional order s must lie in (0,1) (got " << s << ")";
    throw ConfigError(msg.str());
  }
  if (!(kernel_constant > 0.0)) {
    msg << "domain: kernel_constant must be positive (got " << kernel_constant << ")";
    throw ConfigError(msg.str());
  }
  if (!(h > 0.0)) {
    msg << "domain: grid spacing h must be positive (got " << h << ")";
    throw ConfigError(msg.str());
  }
  if (!steps_in(b - a, h)) {
    msg << "domain: h=" << h << " does not divide b-a=" << (b - a);
    throw ConfigError(msg.str());
  }
  if (!steps_in(collar_width, h)) {
    msg << "domain: h=" << h << " does not divide collar_width=" << collar_width;
    throw ConfigError(msg.str());
  }
}

const char* region_name(Region r) {
  switch (r) {
    case Region::dirichlet_left: return "dirichlet_left";
    case Region::omega_interior: return "omega_interior";
    case Region::neumann_point: return "neumann_point";
    case Region::collar_interior: return "collar_interior";
    case Region::dirichlet_right: return "dirichlet_right";
  }
  return "unknown";
}

Mesh::Mesh(const DomainSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t n_omega = *steps_in(spec_.b - spec_.a, spec_.h);
  const std::size_t n_collar = *steps_in(spec_.collar_width, spec_.h);
  const std::size_t last = n_omega + n_collar;
  neumann_node_ = n_omega;

  nodes_.resize(last + 1);
  regions_.resize(last + 1);
  for (std::size_t k = 0; k <= last; ++k) {
    // Multiplying instead of accumulating keeps b and b+w exact when h is dyadic.
    nodes_[k] = spec_.a + static_cast<double>(k) * spec_.h;
    if (k == 0)
      regions_[k] = Region::dirichlet_left;
    else if (k < n_omega)
      regions_[k] = Region::omega_interior;
    else if (k == n_omega)
      regions_[k] = Region::neumann_point;
    else if (k < last)
      regions_[k] = Region::collar_interior;
    else
      regions_[k] = Region::dirichlet_right;
  }
  nodes_[n_omega] = spec_.b;
  nodes_[last] = spec_.window_end();

  omega_weights_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof_count()));
  for (std::size_t i = 0; i < dof_count(); ++i) {
    const Region r = dof_region(i);
    if (r == Region::omega_interior)
      omega_weights_[static_cast<Eigen::Index>(i)] = spec_.h;
    else if (r == Region::neumann_point)
      omega_weights_[static_cast<Eigen::Index>(i)] = 0.5 * spec_.h;
  }
}

std::vector<std::size_t> Mesh::middle_half_dofs() const {
  const double lo = spec_.a + 0.25 * spec_.omega_length();
  const double hi = spec_.b - 0.25 * spec_.omega_length();
  const double eps = 1e-12 * spec_.omega_length();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dof_count(); ++i) {
    const double x = dof_coordinate(i);
    if (x >= lo - eps && x <= hi + eps) out.push_back(i);
  }
  return out;
}

Eigen::VectorXd Mesh::to_nodal(const Eigen::VectorXd& dofs) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(node_count()));
  out.segment(1, static_cast<Eigen::Index>(dof_count())) = dofs;
  return out;
}

double Mesh::evaluate(const Eigen::VectorXd& dofs, double x) const {
  if (x <= nodes_.front() || x >= nodes_.back()) return 0.0;
  const double t = (x - spec_.a) / spec_.h;
  std::size_t k = static_cast<std::size_t>(std::floor(t));
  if (k >= element_count()) k = element_count() - 1;
  const double local = t - static_cast<double>(k);
  auto value = [&](std::size_t node) {
    const auto d = dof(node);
    return d ? dofs[static_cast<Eigen::Index>(*d)] : 0.0;
  };
  return (1.0 - local) * value(k) + local * value(k + 1);
}

Mesh build_mesh(const DomainSpec& spec) { return Mesh(spec); }

double dirichlet_tail_weight(double x, const DomainSpec& spec) {
  if (!(x > spec.a && x < spec.b)) {
    std::ostringstream msg;
    msg << "dirichlet_tail_weight: x=" << x << " is not inside Omega=(" << spec.a << ","
        << spec.b << ")";
    throw DomainError(msg.str());
  }
  const double two_s = 2.0 * spec.s;
  return spec.kernel_constant *
         (std::pow(x - spec.a, -two_s) + std::pow(spec.window_end() - x, -two_s)) / two_s;
}

}  // namespace mixlab
