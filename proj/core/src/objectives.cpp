#include "wdro/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wdro::objectives {

DifferentiableLoss::DifferentiableLoss(const ad::ComputationGraph& graph, Vector theta,
                                       Regularity regularity)
    : graph_(&graph), theta_(std::move(theta)), regularity_(regularity) {
  if (theta_.size() != graph.parameter_count()) {
    throw ad::ShapeError("parameters", "expected " + std::to_string(graph.parameter_count()) +
                                           " entries, got " + std::to_string(theta_.size()));
  }
}

double DifferentiableLoss::value(const Sample& z) const {
  return ad::evaluate(*graph_, z, std::span<const double>(theta_.data(), theta_.size()));
}

Sample DifferentiableLoss::input_gradient(const Sample& z) const {
  Vector gx = ad::input_gradient(*graph_, z, std::span<const double>(theta_.data(), theta_.size()));
  return Sample(std::move(gx), Vector::Zero(z.y.size()));
}

void SurrogateConfig::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("surrogate: alpha must be >= 0");
  if (order.is_infinite()) throw std::invalid_argument("surrogate: order must be finite");
  if (!(order.value() > 1.0)) throw std::invalid_argument("surrogate: order must exceed 1");
}

double risk(const measures::EmpiricalMeasure& measure, const DifferentiableLoss& h) {
  double total = 0.0;
  for (std::size_t i = 0; i < measure.size(); ++i) total += measure.weights()[i] * h.value(measure[i]);
  return total;
}

double risk(const measures::PerturbedMeasure& measure, const DifferentiableLoss& h) {
  return risk(measure.as_measure(), h);
}

double gradient_penalty(const measures::EmpiricalMeasure& measure, const DifferentiableLoss& h,
                        geometry::Order p_star, const geometry::NormSpec& norm) {
  if (p_star.is_infinite()) {
    double worst = 0.0;
    for (const Sample& z : measure.points()) {
      worst = std::max(worst, geometry::dual_norm(h.input_gradient(z), norm));
    }
    return worst;
  }
  const double r = p_star.value();
  double total = 0.0;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const double g = geometry::dual_norm(h.input_gradient(measure[i]), norm);
    total += measure.weights()[i] * std::pow(g, r);
  }
  return std::pow(total, 1.0 / r);
}

double surrogate_risk(const measures::EmpiricalMeasure& measure, const DifferentiableLoss& h,
                      const SurrogateConfig& cfg) {
  cfg.validate();
  const double base = risk(measure, h);
  if (cfg.alpha == 0.0) return base;
  return base + cfg.alpha * gradient_penalty(measure, h, cfg.p_star(), cfg.norm);
}

double perturbed_surrogate_risk(const measures::PerturbedMeasure& pm, const DifferentiableLoss& h,
                                const SurrogateConfig& cfg) {
  return surrogate_risk(pm.as_measure(), h, cfg);
}

ad::PenalizedLoss training_objective(const ad::ComputationGraph& graph,
                                     std::span<const Sample> batch, std::span<const double> theta,
                                     double lambda_grad) {
  if (!(lambda_grad >= 0.0)) throw std::invalid_argument("training objective: lambda_grad must be >= 0");
  if (batch.empty()) throw std::invalid_argument("training objective: empty batch");
  return ad::parameter_gradient_of_penalized_loss(graph, batch, theta, lambda_grad);
}

}  // namespace wdro::objectives
