#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wdro/autodiff.hpp"
#include "wdro/geometry.hpp"
#include "wdro/measures.hpp"

namespace wdro::objectives {

/// Smoothness metadata used by the verification suites. Nothing here is
/// enforced during training.
struct Regularity {
  std::optional<double> holder_constant;   // C_H
  std::optional<double> holder_exponent;   // k
  std::optional<double> lipschitz;         // upper bound on ||grad_z h||_*
  std::optional<double> gradient_floor;    // C_grad, only ever logged
};

/// A loss h_theta(z) bound to fixed parameters.
class DifferentiableLoss {
 public:
  DifferentiableLoss(const ad::ComputationGraph& graph, Vector theta, Regularity regularity = {});

  double value(const Sample& z) const;
  /// Gradient with respect to z. Only the feature block is non-zero: labels
  /// are treated as constants.
  Sample input_gradient(const Sample& z) const;

  const ad::ComputationGraph& graph() const { return *graph_; }
  const Vector& theta() const { return theta_; }
  const Regularity& regularity() const { return regularity_; }

 private:
  const ad::ComputationGraph* graph_;
  Vector theta_;
  Regularity regularity_;
};

struct SurrogateConfig {
  double alpha = 0.0;
  geometry::Order order = geometry::Order::rational(2);
  geometry::NormSpec norm;

  geometry::Order p_star() const { return geometry::holder_conjugate(order); }
  /// Throws std::invalid_argument unless alpha >= 0 and 1 < p < infinity.
  void validate() const;
};

/// Weighted mean of h over the support.
double risk(const measures::EmpiricalMeasure& measure, const DifferentiableLoss& h);
/// Risk over the perturbed points (base weights).
double risk(const measures::PerturbedMeasure& measure, const DifferentiableLoss& h);

/// (sum_i w_i ||grad_z h(z_i)||_*^{p*})^{1/p*}, or max_i ||grad_z h(z_i)||_*
/// when p* is infinite.
double gradient_penalty(const measures::EmpiricalMeasure& measure, const DifferentiableLoss& h,
                        geometry::Order p_star, const geometry::NormSpec& norm);

/// risk + alpha * gradient_penalty.
double surrogate_risk(const measures::EmpiricalMeasure& measure, const DifferentiableLoss& h,
                      const SurrogateConfig& cfg);

/// Same as surrogate_risk evaluated entirely at the perturbed points.
double perturbed_surrogate_risk(const measures::PerturbedMeasure& pm, const DifferentiableLoss& h,
                                const SurrogateConfig& cfg);

/// Mean loss plus lambda_grad times the mean squared l2 input-gradient norm,
/// with its parameter gradient. Throws for an empty batch or lambda < 0.
ad::PenalizedLoss training_objective(const ad::ComputationGraph& graph,
                                     std::span<const Sample> batch, std::span<const double> theta,
                                     double lambda_grad);

}  // namespace wdro::objectives
