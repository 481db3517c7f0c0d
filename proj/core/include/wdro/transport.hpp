#pragma once

#include <cstddef>
#include <span>

#include "wdro/sample.hpp"

namespace wdro::transport {

struct TransportPlan {
  double cost = 0.0;
  Matrix flow;  // supply.size() x demand.size()
  std::size_t iterations = 0;
};

/// Exact balanced transportation problem solved with the transportation
/// simplex (north-west corner start, u-v potentials, stepping-stone cycles).
/// Supply and demand totals must agree to 1e-9; the last demand entry
/// absorbs any residual below that.
TransportPlan solve(std::span<const double> supply, std::span<const double> demand,
                    const Matrix& cost);

}  // namespace wdro::transport
