#pragma once

#include <limits>

namespace timewarp {

// Simulation timestamps. Doubles with +infinity as the "no event" sentinel;
// min() over an empty set of times is kInfinity by convention.
using VirtualTime = double;

inline constexpr VirtualTime kInfinity = std::numeric_limits<double>::infinity();

using LpId = unsigned;
using WorkerId = unsigned;

}  // namespace timewarp
