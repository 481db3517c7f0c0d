#include "wdro/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace wdro::lp {

const char* status_name(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-12;

class Simplex {
 public:
  Simplex(Tableau tableau, std::vector<Eigen::Index> basis, Eigen::Index entering_limit)
      : t_(std::move(tableau)), basis_(std::move(basis)), entering_limit_(entering_limit) {}

  // Runs pivots on the objective stored in the last row. Returns false when
  // the problem is unbounded.
  Status run(std::size_t& iterations, std::size_t max_iterations) {
    const Eigen::Index m = t_.rows() - 1;
    const Eigen::Index rhs = t_.cols() - 1;
    std::size_t degenerate_run = 0;
    while (true) {
      if (iterations >= max_iterations) return Status::iteration_limit;
      // Dantzig's rule, falling back to Bland's rule after a run of
      // degenerate pivots so the method cannot cycle.
      const bool bland = degenerate_run > 32;
      Eigen::Index enter = -1;
      double best = -kCostTol;
      for (Eigen::Index j = 0; j < entering_limit_; ++j) {
        const double d = t_(m, j);
        if (d < best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter < 0) return Status::optimal;

      Eigen::Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < m; ++r) {
        const double a = t_(r, enter);
        if (a <= kPivotTol) continue;
        const double q = t_(r, rhs) / a;
        if (q < ratio - 1e-15 || (q <= ratio + 1e-15 && leave >= 0 && basis_[r] < basis_[leave])) {
          ratio = q;
          leave = r;
        }
      }
      if (leave < 0) return Status::unbounded;
      degenerate_run = ratio <= 1e-15 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++iterations;
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index r = 0; r < t_.rows(); ++r) {
      if (r == row) continue;
      const double f = t_(r, col);
      if (f != 0.0) t_.row(r) -= f * t_.row(row);
    }
    basis_[row] = col;
  }

  Tableau& tableau() { return t_; }
  std::vector<Eigen::Index>& basis() { return basis_; }
  void set_entering_limit(Eigen::Index limit) { entering_limit_ = limit; }

 private:
  Tableau t_;
  std::vector<Eigen::Index> basis_;
  Eigen::Index entering_limit_;
};

}  // namespace

Solution solve(const Problem& problem) {
  const auto n = static_cast<Eigen::Index>(problem.objective.size());
  const auto m = static_cast<Eigen::Index>(problem.constraints.size());
  for (const auto& c : problem.constraints) {
    if (static_cast<Eigen::Index>(c.coefficients.size()) != n) {
      throw std::invalid_argument("lp::solve: constraint width does not match objective");
    }
  }

  // Normalize to non-negative right-hand sides.
  struct Row {
    std::vector<double> a;
    Relation rel;
    double b;
  };
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(m));
  Eigen::Index slack_count = 0;
  Eigen::Index artificial_count = 0;
  for (const auto& c : problem.constraints) {
    Row r{c.coefficients, c.relation, c.rhs};
    if (r.b < 0.0) {
      for (double& v : r.a) v = -v;
      r.b = -r.b;
      if (r.rel == Relation::less_equal) r.rel = Relation::greater_equal;
      else if (r.rel == Relation::greater_equal) r.rel = Relation::less_equal;
    }
    if (r.rel != Relation::equal) ++slack_count;
    if (r.rel != Relation::less_equal) ++artificial_count;
    rows.push_back(std::move(r));
  }

  const Eigen::Index art_begin = n + slack_count;
  const Eigen::Index total = art_begin + artificial_count;
  Tableau t = Tableau::Zero(m + 1, total + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  Eigen::Index next_slack = n;
  Eigen::Index next_art = art_begin;
  for (Eigen::Index r = 0; r < m; ++r) {
    const Row& row = rows[static_cast<std::size_t>(r)];
    for (Eigen::Index j = 0; j < n; ++j) t(r, j) = row.a[static_cast<std::size_t>(j)];
    t(r, total) = row.b;
    switch (row.rel) {
      case Relation::less_equal:
        t(r, next_slack) = 1.0;
        basis[static_cast<std::size_t>(r)] = next_slack++;
        break;
      case Relation::greater_equal:
        t(r, next_slack++) = -1.0;
        t(r, next_art) = 1.0;
        basis[static_cast<std::size_t>(r)] = next_art++;
        break;
      case Relation::equal:
        t(r, next_art) = 1.0;
        basis[static_cast<std::size_t>(r)] = next_art++;
        break;
    }
  }

  Solution sol;
  const std::size_t max_iterations = 50000 + 50 * static_cast<std::size_t>(total + m);

  // Phase 1: maximize -sum(artificials).
  if (artificial_count > 0) {
    for (Eigen::Index j = art_begin; j < total; ++j) t(m, j) = 1.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (basis[static_cast<std::size_t>(r)] >= art_begin) t.row(m) -= t.row(r);
    }
    Simplex phase1(std::move(t), std::move(basis), total);
    const Status s = phase1.run(sol.iterations, max_iterations);
    if (s == Status::iteration_limit) {
      sol.status = s;
      return sol;
    }
    t = std::move(phase1.tableau());
    basis = std::move(phase1.basis());
    double scale = 1.0;
    for (const auto& r : rows) scale = std::max(scale, std::abs(r.b));
    if (t(m, total) < -1e-9 * scale) {
      sol.status = Status::infeasible;
      return sol;
    }
    // Drive remaining artificials out of the basis where possible; rows
    // where that is impossible are redundant and stay inert.
    Simplex cleanup(std::move(t), std::move(basis), art_begin);
    for (Eigen::Index r = 0; r < m; ++r) {
      if (cleanup.basis()[static_cast<std::size_t>(r)] < art_begin) continue;
      Eigen::Index col = -1;
      double best = kPivotTol;
      for (Eigen::Index j = 0; j < art_begin; ++j) {
        if (std::abs(cleanup.tableau()(r, j)) > best) {
          best = std::abs(cleanup.tableau()(r, j));
          col = j;
        }
      }
      if (col >= 0) {
        cleanup.pivot(r, col);
      } else {
        cleanup.tableau().row(r).setZero();
      }
    }
    t = std::move(cleanup.tableau());
    basis = std::move(cleanup.basis());
  }

  // Phase 2.
  const double sign = problem.maximize ? 1.0 : -1.0;
  t.row(m).setZero();
  for (Eigen::Index j = 0; j < n; ++j) t(m, j) = -sign * problem.objective[static_cast<std::size_t>(j)];
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index b = basis[static_cast<std::size_t>(r)];
    if (b < n) {
      const double c = sign * problem.objective[static_cast<std::size_t>(b)];
      if (c != 0.0) t.row(m) += c * t.row(r);
    }
  }
  Simplex phase2(std::move(t), std::move(basis), art_begin);
  const Status s = phase2.run(sol.iterations, max_iterations);
  sol.status = s;
  if (s != Status::optimal) return sol;

  const Tableau& fin = phase2.tableau();
  sol.x.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index b = phase2.basis()[static_cast<std::size_t>(r)];
    if (b < n) sol.x[static_cast<std::size_t>(b)] = std::max(0.0, fin(r, total));
  }
  double value = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    value += problem.objective[static_cast<std::size_t>(j)] * sol.x[static_cast<std::size_t>(j)];
  }
  sol.objective = value;
  return sol;
}

}  // namespace wdro::lp
