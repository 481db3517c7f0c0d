#include "wdro/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace wdro::transport {

namespace {

struct Cell {
  Eigen::Index row;
  Eigen::Index col;
};

// Basis cells form a spanning tree on the bipartite graph with row nodes
// [0, m) and column nodes [m, m + n).
class BasisTree {
 public:
  BasisTree(Eigen::Index m, Eigen::Index n) : m_(m), n_(n) {}

  void rebuild(const std::vector<Cell>& cells) {
    adjacency_.assign(static_cast<std::size_t>(m_ + n_), {});
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto r = static_cast<std::size_t>(cells[k].row);
      const auto c = static_cast<std::size_t>(m_ + cells[k].col);
      adjacency_[r].push_back(k);
      adjacency_[c].push_back(k);
    }
  }

  void potentials(const std::vector<Cell>& cells, const Matrix& cost, Vector& u, Vector& v) const {
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<Eigen::Index> stack{0};
    u.setZero(m_);
    v.setZero(n_);
    seen[0] = 1;
    while (!stack.empty()) {
      const Eigen::Index node = stack.back();
      stack.pop_back();
      for (std::size_t k : adjacency_[static_cast<std::size_t>(node)]) {
        const Cell& cell = cells[k];
        const Eigen::Index other = node < m_ ? m_ + cell.col : cell.row;
        if (seen[static_cast<std::size_t>(other)]) continue;
        seen[static_cast<std::size_t>(other)] = 1;
        if (node < m_) {
          v[cell.col] = cost(cell.row, cell.col) - u[cell.row];
        } else {
          u[cell.row] = cost(cell.row, cell.col) - v[cell.col];
        }
        stack.push_back(other);
      }
    }
  }

  // Basis cell indices along the tree path from row node `row` to column
  // node `col`, in order starting at the row.
  std::vector<std::size_t> path(Eigen::Index row, Eigen::Index col) const {
    const auto total = static_cast<std::size_t>(m_ + n_);
    std::vector<std::int64_t> via(total, -1);
    std::vector<std::int64_t> parent(total, -1);
    std::vector<char> seen(total, 0);
    std::vector<Eigen::Index> queue{row};
    seen[static_cast<std::size_t>(row)] = 1;
    const Eigen::Index target = m_ + col;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const Eigen::Index node = queue[head];
      if (node == target) break;
      for (std::size_t k : adjacency_[static_cast<std::size_t>(node)]) {
        const Eigen::Index other = node < m_ ? m_ + cells_col(k) : cells_row(k);
        if (seen[static_cast<std::size_t>(other)]) continue;
        seen[static_cast<std::size_t>(other)] = 1;
        via[static_cast<std::size_t>(other)] = static_cast<std::int64_t>(k);
        parent[static_cast<std::size_t>(other)] = node;
        queue.push_back(other);
      }
    }
    std::vector<std::size_t> edges;
    for (Eigen::Index node = target; node != row;
         node = parent[static_cast<std::size_t>(node)]) {
      if (via[static_cast<std::size_t>(node)] < 0) throw std::logic_error("transport basis is not a tree");
      edges.push_back(static_cast<std::size_t>(via[static_cast<std::size_t>(node)]));
    }
    std::reverse(edges.begin(), edges.end());
    return edges;
  }

  void bind(const std::vector<Cell>* cells) { cells_ = cells; }

 private:
  Eigen::Index cells_row(std::size_t k) const { return (*cells_)[k].row; }
  Eigen::Index cells_col(std::size_t k) const { return (*cells_)[k].col; }

  Eigen::Index m_;
  Eigen::Index n_;
  std::vector<std::vector<std::size_t>> adjacency_;
  const std::vector<Cell>* cells_ = nullptr;
};

}  // namespace

TransportPlan solve(std::span<const double> supply_in, std::span<const double> demand_in,
                    const Matrix& cost) {
  const auto m = static_cast<Eigen::Index>(supply_in.size());
  const auto n = static_cast<Eigen::Index>(demand_in.size());
  if (m == 0 || n == 0) throw std::invalid_argument("transport::solve: empty marginal");
  if (cost.rows() != m || cost.cols() != n) {
    throw std::invalid_argument("transport::solve: cost matrix shape does not match marginals");
  }
  std::vector<double> supply(supply_in.begin(), supply_in.end());
  std::vector<double> demand(demand_in.begin(), demand_in.end());
  for (double s : supply) {
    if (s < 0.0) throw std::invalid_argument("transport::solve: negative supply");
  }
  for (double d : demand) {
    if (d < 0.0) throw std::invalid_argument("transport::solve: negative demand");
  }
  const double total_supply = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_demand = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(total_supply - total_demand) > 1e-9) {
    throw std::invalid_argument("transport::solve: supply and demand totals differ");
  }
  demand.back() += total_supply - total_demand;

  // North-west corner start: exactly m + n - 1 basic cells.
  TransportPlan plan;
  plan.flow = Matrix::Zero(m, n);
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(m + n - 1));
  {
    Eigen::Index i = 0;
    Eigen::Index j = 0;
    std::vector<double> s = supply;
    std::vector<double> d = demand;
    while (i < m && j < n) {
      const double x = std::min(s[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)]);
      plan.flow(i, j) = x;
      cells.push_back({i, j});
      s[static_cast<std::size_t>(i)] -= x;
      d[static_cast<std::size_t>(j)] -= x;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (s[static_cast<std::size_t>(i)] <= d[static_cast<std::size_t>(j)]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> basic =
      Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic>::Zero(m, n);
  for (const Cell& c : cells) basic(c.row, c.col) = 1;

  BasisTree tree(m, n);
  tree.bind(&cells);
  Vector u;
  Vector v;
  const std::size_t max_iterations = 200 * static_cast<std::size_t>(m * n) + 1000;
  while (true) {
    tree.rebuild(cells);
    tree.potentials(cells, cost, u, v);
    Eigen::Index er = -1;
    Eigen::Index ec = -1;
    double best = -tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (basic(i, j)) continue;
        const double reduced = cost(i, j) - u[i] - v[j];
        if (reduced < best) {
          best = reduced;
          er = i;
          ec = j;
        }
      }
    }
    if (er < 0) break;
    if (++plan.iterations > max_iterations) {
      throw std::runtime_error("transport::solve: iteration limit exceeded");
    }

    // Cycle: entering cell (+), then tree path edges from the column end
    // alternate (-, +, -, ...).
    const std::vector<std::size_t> edges = tree.path(er, ec);
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = cells.size();
    for (std::size_t t = edges.size(); t-- > 0;) {
      const bool minus = ((edges.size() - 1 - t) % 2) == 0;
      if (!minus) continue;
      const Cell& c = cells[edges[t]];
      const double f = plan.flow(c.row, c.col);
      if (f < theta) {
        theta = f;
        leaving = edges[t];
      }
    }
    for (std::size_t t = 0; t < edges.size(); ++t) {
      const bool minus = ((edges.size() - 1 - t) % 2) == 0;
      const Cell& c = cells[edges[t]];
      plan.flow(c.row, c.col) += minus ? -theta : theta;
      if (plan.flow(c.row, c.col) < 0.0) plan.flow(c.row, c.col) = 0.0;
    }
    plan.flow(er, ec) = theta;
    const Cell out = cells[leaving];
    plan.flow(out.row, out.col) = 0.0;
    basic(out.row, out.col) = 0;
    basic(er, ec) = 1;
    cells[leaving] = {er, ec};
  }

  plan.cost = (plan.flow.array() * cost.array()).sum();
  return plan;
}

}  // namespace wdro::transport
