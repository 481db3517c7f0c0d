#pragma once

// Dense two-phase simplex for the small exact linear programs used as
// verification oracles (primal worst-case risk, transport cross-checks).

#include <cstddef>
#include <string>
#include <vector>

namespace wdro::lp {

enum class Relation { less_equal, equal, greater_equal };

struct Constraint {
  std::vector<double> coefficients;  // dense, one per variable
  Relation relation = Relation::less_equal;
  double rhs = 0.0;
};

/// max (or min) c^T x  subject to the constraints and x >= 0.
struct Problem {
  std::vector<double> objective;
  bool maximize = true;
  std::vector<Constraint> constraints;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

const char* status_name(Status s);

struct Solution {
  Status status = Status::iteration_limit;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t iterations = 0;
};

Solution solve(const Problem& problem);

}  // namespace wdro::lp
