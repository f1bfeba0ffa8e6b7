#pragma once

#include "drmpc/model.hpp"

#include <cstdint>

namespace drmpc::testing {

/// Random small instance with box sets: n = 2..3, m and q in {1, 2}, N = 3..6, Schur-stable A,
/// Lyapunov terminal cost, W = {|w| <= 1}, a random PD sigma_hat and epsilon in [0.01, 0.2].
ScenarioSpec random_small(std::uint64_t seed);

}  // namespace drmpc::testing
