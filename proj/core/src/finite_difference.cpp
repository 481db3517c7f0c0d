#include <algorithm>
#include <cmath>

#include "wdro/autodiff.hpp"

namespace wdro::ad {

FiniteDifferenceReport finite_difference_check(const std::function<double(const Vector&)>& f,
                                               const Vector& analytic, const Vector& point,
                                               double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");
  if (analytic.size() != point.size()) {
    throw std::invalid_argument("finite_difference_check: gradient and point differ in size");
  }
  FiniteDifferenceReport report;
  report.entries.reserve(static_cast<std::size_t>(point.size()));
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = f(probe);
    probe[i] = point[i] - step;
    const double down = f(probe);
    probe[i] = point[i];

    FiniteDifferenceEntry entry;
    entry.coordinate = i;
    entry.analytic = analytic[i];
    entry.numeric = (up - down) / (2.0 * step);
    entry.abs_error = std::abs(entry.analytic - entry.numeric);
    entry.rel_error =
        entry.abs_error / std::max(std::abs(entry.analytic), FiniteDifferenceReport::kRelativeFloor);
    report.max_abs_error = std::max(report.max_abs_error, entry.abs_error);
    report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
    report.entries.push_back(entry);
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const auto& a, const auto& b) { return a.rel_error > b.rel_error; });
  return report;
}

FiniteDifferenceReport finite_difference_check(const ComputationGraph& graph, const Sample& z,
                                               std::span<const double> theta,
                                               DifferentiationTarget target, double step) {
  if (target == DifferentiationTarget::features) {
    const Vector analytic = input_gradient(graph, z, theta);
    auto f = [&](const Vector& x) { return evaluate(graph, Sample(x, z.y), theta); };
    return finite_difference_check(f, analytic, z.x, step);
  }
  const Vector analytic = parameter_gradient(graph, z, theta);
  const Vector point = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  auto f = [&](const Vector& t) {
    return evaluate(graph, z, std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
  };
  return finite_difference_check(f, analytic, point, step);
}

FiniteDifferenceReport finite_difference_check_penalized(const ComputationGraph& graph,
                                                         std::span<const Sample> batch,
                                                         std::span<const double> theta,
                                                         double penalty_weight, double step) {
  const Vector analytic =
      parameter_gradient_of_penalized_loss(graph, batch, theta, penalty_weight).gradient;
  const Vector point = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  // The scalar objective is re-assembled from first-order pieces only, so the
  // check does not reuse the second-order path it is verifying.
  auto f = [&](const Vector& t) {
    const std::span<const double> view(t.data(), static_cast<std::size_t>(t.size()));
    double loss = 0.0;
    double penalty = 0.0;
    for (const Sample& z : batch) {
      loss += evaluate(graph, z, view);
      penalty += input_gradient(graph, z, view).squaredNorm();
    }
    const double count = static_cast<double>(batch.size());
    return loss / count + penalty_weight * (penalty / count);
  };
  return finite_difference_check(f, analytic, point, step);
}

}  // namespace wdro::ad
