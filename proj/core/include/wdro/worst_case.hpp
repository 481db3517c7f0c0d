#pragma once

// Exact local worst-case risk over a p-Wasserstein ball around a discrete
// measure, with the sample space replaced by a finite grid.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wdro/geometry.hpp"
#include "wdro/measures.hpp"
#include "wdro/objectives.hpp"

namespace wdro::oracle {

struct WassersteinBall {
  double radius = 0.0;
  geometry::Order order = geometry::Order::rational(1);
  geometry::NormSpec norm;

  /// Throws std::invalid_argument for a negative radius or infinite order.
  void validate() const;
};

struct InnerSup {
  double value = 0.0;
  std::size_t witness = 0;  // grid index
};

struct WorstCaseResult {
  double value = 0.0;
  double lambda_star = 0.0;
  std::vector<std::size_t> witnesses;  // per center, grid index
  std::optional<double> dual_gap_vs_lp;
};

/// Largest n * |grid| accepted by primal_worst_case_lp.
inline constexpr std::size_t kMaxPrimalVariables = 4096;

/// h tabulated on the grid together with the n x |grid| matrix of p-th power
/// distances. Reused across radii, which is what the rate study needs.
class DiscretizedProblem {
 public:
  /// Throws std::invalid_argument when a support point of `measure` is not a
  /// grid point.
  DiscretizedProblem(const objectives::DifferentiableLoss& h, const measures::EmpiricalMeasure& measure,
                     std::vector<Sample> grid, geometry::Order order, geometry::NormSpec norm = {});

  std::size_t centers() const { return weights_.size(); }
  std::size_t grid_size() const { return grid_.size(); }
  const std::vector<Sample>& grid() const { return grid_; }
  const Vector& grid_values() const { return h_grid_; }
  const Matrix& cost() const { return cost_; }
  const std::vector<std::size_t>& center_indices() const { return center_index_; }
  const std::vector<double>& weights() const { return weights_; }
  geometry::Order order() const { return order_; }

  InnerSup inner_sup(std::size_t center, double lambda) const;
  double dual_objective(double lambda, double radius) const;
  /// Upper end of the lambda bracket; beyond it every inner sup sits at its center.
  double lambda_max() const;
  /// Plain risk, summed in the same order as objectives::risk.
  double center_risk() const;

  WorstCaseResult solve(double radius) const;
  double primal_lp(double radius) const;

 private:
  std::vector<Sample> grid_;
  Vector h_grid_;
  Matrix cost_;
  std::vector<std::size_t> center_index_;
  std::vector<double> weights_;
  geometry::Order order_;
};

/// max over grid points g of h(g) - lambda ||g - center||^p, lowest index on ties.
InnerSup inner_sup(const objectives::DifferentiableLoss& h, const Sample& center, double lambda,
                   const std::vector<Sample>& grid, geometry::Order order,
                   const geometry::NormSpec& norm = {});

/// lambda alpha^p + sum_i w_i inner_sup_i(lambda).
double dual_objective(double lambda, const objectives::DifferentiableLoss& h,
                      const measures::EmpiricalMeasure& measure, const WassersteinBall& ball,
                      const measures::SampleSpaceSpec& grid);

/// Minimizes the dual objective over [0, lambda_max] by golden-section search.
WorstCaseResult worst_case_risk(const objectives::DifferentiableLoss& h,
                                const measures::EmpiricalMeasure& measure, const WassersteinBall& ball,
                                const measures::SampleSpaceSpec& grid);

/// Primal transport LP over couplings supported on centers x grid. Throws
/// std::length_error above kMaxPrimalVariables.
double primal_worst_case_lp(const objectives::DifferentiableLoss& h,
                            const measures::EmpiricalMeasure& measure, const WassersteinBall& ball,
                            const measures::SampleSpaceSpec& grid);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points_used = 0;
  bool defined = false;  // false when fewer than two errors survive the cutoff
};

/// Ordinary least squares of log(error) on log(alpha). Errors below `cutoff`
/// are dropped.
LogLogFit fit_log_log(const std::vector<double>& alpha, const std::vector<double>& error,
                      double cutoff = 1e-13);

struct RateReport {
  std::vector<double> alpha_grid;
  std::vector<double> betas;      // displacement bound per alpha (0 when clean)
  std::vector<double> exact;      // worst-case risk
  std::vector<double> surrogate;  // surrogate (or perturbed surrogate) risk
  std::vector<double> plain;      // plain risk of the evaluated measure
  std::vector<double> errors;     // |surrogate - exact|
  std::vector<double> plain_errors;  // |plain - exact|
  LogLogFit fit;
  LogLogFit plain_fit;
  std::vector<std::string> notes;
};

/// Produces the perturbed measure used at a given alpha.
using PerturbationSchedule = std::function<measures::PerturbedMeasure(double alpha)>;

/// Surrogate-vs-exact errors over a strictly decreasing alpha grid, with a
/// log-log slope fit. When `perturb` is given the surrogate is evaluated on
/// the perturbed measure while the exact value stays centered on `measure`.
RateReport approximation_rate_study(const objectives::DifferentiableLoss& h,
                                    const measures::EmpiricalMeasure& measure, geometry::Order p,
                                    const std::vector<double>& alpha_grid,
                                    const measures::SampleSpaceSpec& grid,
                                    const PerturbationSchedule& perturb = {});

}  // namespace wdro::oracle
