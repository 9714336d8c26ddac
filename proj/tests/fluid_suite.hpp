#pragma once

// Seeded fluid instances shared by the unit and acceptance tests. They cover
// N in {2, 4, 8}, a state trapped at a threshold, a loss-free case and an
// overloaded case with P_L near 0.27.

#include <array>
#include <cstdint>

#include "vsmooth/fluid.hpp"

namespace suite {

struct Instance {
  const char* name;
  vsmooth::fluid::FluidParams params;
  std::uint64_t seed;
};

inline const std::array<Instance, 5>& instances() {
  using vsmooth::fluid::FluidParams;
  static const std::array<Instance, 5> all{{
      {"n2_trapped", FluidParams{2, 1, 1, 1, 1.1, 0.2, 1, 3, 5}, 101},
      {"n4_light", FluidParams{4, 1, 3, 1, 1.2, 0.5, 1, 2, 4}, 202},
      {"n8_tight", FluidParams{8, 1, 1, 1, 4.4, 0.1, 1, 2, 4}, 303},
      {"n2_lossless", FluidParams{2, 1, 1, 1, 1.9, 0.1, 0.5, 1, 2}, 404},
      {"n4_overload", FluidParams{4, 1, 1, 1, 1.4, 0.1, 0.3, 0.6, 1}, 505},
  }};
  return all;
}

// Simulated time giving about two million source transitions.
inline double horizon(const vsmooth::fluid::FluidParams& p) {
  return 2e6 / vsmooth::fluid::expected_transition_rate(p);
}

}  // namespace suite
