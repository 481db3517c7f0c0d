#include "wdro/worst_case.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "wdro/lp.hpp"

namespace wdro::oracle {

void WassersteinBall::validate() const {
  if (!(radius >= 0.0)) throw std::invalid_argument("Wasserstein ball: radius must be >= 0");
  if (order.is_infinite()) throw std::invalid_argument("Wasserstein ball: order must be finite");
}

DiscretizedProblem::DiscretizedProblem(const objectives::DifferentiableLoss& h,
                                       const measures::EmpiricalMeasure& measure,
                                       std::vector<Sample> grid, geometry::Order order,
                                       geometry::NormSpec norm)
    : grid_(std::move(grid)), order_(order) {
  if (grid_.empty()) throw std::invalid_argument("worst case: empty grid");
  if (order.is_infinite()) throw std::invalid_argument("worst case: order must be finite");
  const auto g = static_cast<Eigen::Index>(grid_.size());
  const auto n = static_cast<Eigen::Index>(measure.size());
  h_grid_.resize(g);
  for (Eigen::Index j = 0; j < g; ++j) h_grid_[j] = h.value(grid_[static_cast<std::size_t>(j)]);

  const double p = order.value();
  cost_.resize(n, g);
  center_index_.assign(measure.size(), grid_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& z = measure[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < g; ++j) {
      const Sample& gj = grid_[static_cast<std::size_t>(j)];
      const double d = geometry::sample_distance(gj, z, norm);
      cost_(i, j) = std::pow(d, p);
      if (center_index_[static_cast<std::size_t>(i)] == grid_.size() && gj == z) {
        center_index_[static_cast<std::size_t>(i)] = static_cast<std::size_t>(j);
      }
    }
    if (center_index_[static_cast<std::size_t>(i)] == grid_.size()) {
      throw std::invalid_argument("worst case: support point " + std::to_string(i) +
                                  " is not a grid point; snap the measure to the grid first");
    }
  }
  weights_ = measure.weights();
}

InnerSup DiscretizedProblem::inner_sup(std::size_t center, double lambda) const {
  const auto i = static_cast<Eigen::Index>(center);
  InnerSup best{-std::numeric_limits<double>::infinity(), 0};
  for (Eigen::Index j = 0; j < h_grid_.size(); ++j) {
    const double v = h_grid_[j] - lambda * cost_(i, j);
    if (v > best.value) {
      best.value = v;
      best.witness = static_cast<std::size_t>(j);
    }
  }
  return best;
}

double DiscretizedProblem::dual_objective(double lambda, double radius) const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("dual objective: lambda must be >= 0");
  double total = lambda * std::pow(radius, order_.value());
  for (std::size_t i = 0; i < centers(); ++i) total += weights_[i] * inner_sup(i, lambda).value;
  return total;
}

double DiscretizedProblem::lambda_max() const {
  double min_cost = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < cost_.size(); ++k) {
    const double c = cost_.data()[k];
    if (c > 0.0) min_cost = std::min(min_cost, c);
  }
  if (!std::isfinite(min_cost)) return 1.0;
  return (h_grid_.maxCoeff() - h_grid_.minCoeff()) / min_cost + 1.0;
}

double DiscretizedProblem::center_risk() const {
  double total = 0.0;
  for (std::size_t i = 0; i < centers(); ++i) {
    total += weights_[i] * h_grid_[static_cast<Eigen::Index>(center_index_[i])];
  }
  return total;
}

WorstCaseResult DiscretizedProblem::solve(double radius) const {
  if (!(radius >= 0.0)) throw std::invalid_argument("worst case: radius must be >= 0");
  // Golden-section search on the convex dual objective.
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0;
  double b = lambda_max();
  double x1 = b - ratio * (b - a);
  double x2 = a + ratio * (b - a);
  double f1 = dual_objective(x1, radius);
  double f2 = dual_objective(x2, radius);
  for (int iter = 0; iter < 1000; ++iter) {
    const double width = b - a;
    const double ulp = std::nextafter(b, std::numeric_limits<double>::infinity()) - b;
    if (width <= 1e-10 || width <= 4.0 * ulp) break;
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = dual_objective(x1, radius);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = dual_objective(x2, radius);
    }
  }
  WorstCaseResult result;
  result.lambda_star = 0.5 * (a + b);
  if (a == 0.0 && dual_objective(0.0, radius) <= dual_objective(result.lambda_star, radius)) {
    result.lambda_star = 0.0;
  }
  const double lambda = result.lambda_star;
  result.value = lambda * std::pow(radius, order_.value());
  result.witnesses.reserve(centers());
  for (std::size_t i = 0; i < centers(); ++i) {
    const InnerSup s = inner_sup(i, lambda);
    result.value += weights_[i] * s.value;
    result.witnesses.push_back(s.witness);
  }
  return result;
}

double DiscretizedProblem::primal_lp(double radius) const {
  const std::size_t n = centers();
  const std::size_t g = grid_size();
  if (n * g > kMaxPrimalVariables) {
    throw std::length_error("primal worst case: " + std::to_string(n * g) +
                            " coupling variables exceed the limit of " +
                            std::to_string(kMaxPrimalVariables));
  }
  lp::Problem problem;
  problem.maximize = true;
  problem.objective.resize(n * g);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g; ++j) problem.objective[i * g + j] = h_grid_[static_cast<Eigen::Index>(j)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    lp::Constraint row;
    row.coefficients.assign(n * g, 0.0);
    for (std::size_t j = 0; j < g; ++j) row.coefficients[i * g + j] = 1.0;
    row.relation = lp::Relation::equal;
    row.rhs = weights_[i];
    problem.constraints.push_back(std::move(row));
  }
  lp::Constraint budget;
  budget.coefficients.resize(n * g);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      budget.coefficients[i * g + j] = cost_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  budget.relation = lp::Relation::less_equal;
  budget.rhs = std::pow(radius, order_.value());
  problem.constraints.push_back(std::move(budget));

  const lp::Solution sol = lp::solve(problem);
  if (sol.status != lp::Status::optimal) {
    throw std::runtime_error(std::string("primal worst case: LP ended with status ") +
                             lp::status_name(sol.status));
  }
  return sol.objective;
}

InnerSup inner_sup(const objectives::DifferentiableLoss& h, const Sample& center, double lambda,
                   const std::vector<Sample>& grid, geometry::Order order,
                   const geometry::NormSpec& norm) {
  if (grid.empty()) throw std::invalid_argument("inner sup: empty grid");
  if (order.is_infinite()) throw std::invalid_argument("inner sup: order must be finite");
  const double p = order.value();
  InnerSup best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double v = h.value(grid[j]) - lambda * std::pow(geometry::sample_distance(grid[j], center, norm), p);
    if (v > best.value) {
      best.value = v;
      best.witness = j;
    }
  }
  return best;
}

namespace {

std::vector<Sample> grid_points(const measures::SampleSpaceSpec& grid, const WassersteinBall& ball) {
  ball.validate();
  if (!(grid.norm.kind == ball.norm.kind && grid.norm.label_gap == ball.norm.label_gap)) {
    throw std::invalid_argument("worst case: grid and ball use different norms");
  }
  return grid.grid();
}

}  // namespace

double dual_objective(double lambda, const objectives::DifferentiableLoss& h,
                      const measures::EmpiricalMeasure& measure, const WassersteinBall& ball,
                      const measures::SampleSpaceSpec& grid) {
  const DiscretizedProblem problem(h, measure, grid_points(grid, ball), ball.order, ball.norm);
  return problem.dual_objective(lambda, ball.radius);
}

WorstCaseResult worst_case_risk(const objectives::DifferentiableLoss& h,
                                const measures::EmpiricalMeasure& measure, const WassersteinBall& ball,
                                const measures::SampleSpaceSpec& grid) {
  const DiscretizedProblem problem(h, measure, grid_points(grid, ball), ball.order, ball.norm);
  return problem.solve(ball.radius);
}

double primal_worst_case_lp(const objectives::DifferentiableLoss& h,
                            const measures::EmpiricalMeasure& measure, const WassersteinBall& ball,
                            const measures::SampleSpaceSpec& grid) {
  if (measure.size() * grid.grid_size() > kMaxPrimalVariables) {
    throw std::length_error("primal worst case: " + std::to_string(measure.size() * grid.grid_size()) +
                            " coupling variables exceed the limit of " +
                            std::to_string(kMaxPrimalVariables));
  }
  const DiscretizedProblem problem(h, measure, grid_points(grid, ball), ball.order, ball.norm);
  return problem.primal_lp(ball.radius);
}

LogLogFit fit_log_log(const std::vector<double>& alpha, const std::vector<double>& error, double cutoff) {
  if (alpha.size() != error.size()) throw std::invalid_argument("log-log fit: size mismatch");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (error[k] < cutoff || !(alpha[k] > 0.0)) continue;
    lx.push_back(std::log(alpha[k]));
    ly.push_back(std::log(error[k]));
  }
  LogLogFit fit;
  fit.points_used = lx.size();
  if (lx.size() < 2) return fit;
  const double m = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.defined = true;
  return fit;
}

RateReport approximation_rate_study(const objectives::DifferentiableLoss& h,
                                    const measures::EmpiricalMeasure& measure, geometry::Order p,
                                    const std::vector<double>& alpha_grid,
                                    const measures::SampleSpaceSpec& grid,
                                    const PerturbationSchedule& perturb) {
  if (alpha_grid.size() < 2) throw std::invalid_argument("rate study: need at least two radii");
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    if (!(alpha_grid[k] > 0.0)) throw std::invalid_argument("rate study: radii must be positive");
    if (k > 0 && !(alpha_grid[k] < alpha_grid[k - 1])) {
      throw std::invalid_argument("rate study: radii must be strictly decreasing");
    }
  }
  const DiscretizedProblem problem(h, measure, grid.grid(), p, grid.norm);

  RateReport report;
  report.alpha_grid = alpha_grid;
  bool boundary_hit = false;
  for (double alpha : alpha_grid) {
    const WorstCaseResult wc = problem.solve(alpha);
    objectives::SurrogateConfig cfg{alpha, p, grid.norm};
    double surrogate = 0.0;
    double plain = 0.0;
    double beta = 0.0;
    if (perturb) {
      const measures::PerturbedMeasure pm = perturb(alpha);
      surrogate = objectives::perturbed_surrogate_risk(pm, h, cfg);
      plain = objectives::risk(pm, h);
      beta = pm.displacement_bound();
    } else {
      surrogate = objectives::surrogate_risk(measure, h, cfg);
      plain = problem.center_risk();
    }
    for (std::size_t i = 0; i < wc.witnesses.size(); ++i) {
      const Sample& w = problem.grid()[wc.witnesses[i]];
      for (std::size_t d = 0; d < grid.dimension(); ++d) {
        const double v = w.x[static_cast<Eigen::Index>(d)];
        const double c = measure[i].x[static_cast<Eigen::Index>(d)];
        if ((v == grid.lower[d] || v == grid.upper[d]) && v != c) boundary_hit = true;
      }
    }
    report.betas.push_back(beta);
    report.exact.push_back(wc.value);
    report.surrogate.push_back(surrogate);
    report.plain.push_back(plain);
    report.errors.push_back(std::abs(surrogate - wc.value));
    report.plain_errors.push_back(std::abs(plain - wc.value));
  }
  report.fit = fit_log_log(report.alpha_grid, report.errors);
  report.plain_fit = fit_log_log(report.alpha_grid, report.plain_errors);
  const std::size_t dropped = alpha_grid.size() - report.fit.points_used;
  if (dropped > 0) {
    report.notes.push_back(std::to_string(dropped) +
                           " surrogate errors below 1e-13 were excluded from the slope fit");
  }
  if (!report.fit.defined) report.notes.push_back("surrogate slope undefined: all errors are zero");
  if (boundary_hit) report.notes.push_back("some worst-case witnesses lie on the grid boundary");
  return report;
}

}  // namespace wdro::oracle
