#include "mixlab/random_fields.hpp"

#include <random>

namespace mixlab {

GridFunction random_positive(std::size_t dofs, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  GridFunction v(static_cast<Eigen::Index>(dofs));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(gen);
  return v;
}

GridFunction random_signed(std::size_t dofs, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  GridFunction v(static_cast<Eigen::Index>(dofs));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(gen);
  return v;
}

}  // namespace mixlab
