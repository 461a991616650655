#pragma once

#include "mixlab/operators.hpp"

#include <cstdint>

namespace mixlab {

/// Strictly positive DOF vector with entries uniform in [lo, hi), deterministic in `seed`.
GridFunction random_positive(std::size_t dofs, std::uint64_t seed, double lo = 0.1,
                             double hi = 1.0);

/// Sign-unrestricted DOF vector with standard normal entries.
GridFunction random_signed(std::size_t dofs, std::uint64_t seed);

}  // namespace mixlab
