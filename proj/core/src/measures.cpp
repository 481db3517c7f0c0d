#include "wdro/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "wdro/objectives.hpp"
#include "wdro/transport.hpp"

namespace wdro::measures {

using geometry::NormKind;
using geometry::NormSpec;

namespace {

double max_norm(const EmpiricalMeasure& m, const NormSpec& norm) {
  double c = 0.0;
  for (const Sample& z : m.points()) c = std::max(c, geometry::norm(z, norm));
  return c;
}

void require_homogeneous(const NormSpec& norm, const char* who) {
  if (norm.kind == NormKind::product_classification) {
    throw std::invalid_argument(std::string(who) +
                                ": the classification product norm is not homogeneous in the "
                                "label term; use the euclidean norm on (x, y)");
  }
}

}  // namespace

namespace {

void check_same_space(const std::vector<Sample>& points) {
  const auto dx = points.front().x.size();
  const auto dy = points.front().y.size();
  for (const Sample& z : points) {
    if (z.x.size() != dx || z.y.size() != dy) {
      throw std::invalid_argument("EmpiricalMeasure: points live in different spaces");
    }
  }
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<Sample> points)
    : points_(std::move(points)), weights_() {
  if (points_.empty()) throw std::invalid_argument("EmpiricalMeasure: needs at least one point");
  check_same_space(points_);
  weights_.assign(points_.size(), 1.0 / static_cast<double>(points_.size()));
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<Sample> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.empty()) throw std::invalid_argument("EmpiricalMeasure: needs at least one point");
  if (weights_.size() != points_.size()) {
    throw std::invalid_argument("EmpiricalMeasure: weight count differs from point count");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("EmpiricalMeasure: weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("EmpiricalMeasure: weights must sum to 1, got " + std::to_string(total));
  }
  check_same_space(points_);
}

PerturbedMeasure::PerturbedMeasure(EmpiricalMeasure base, std::vector<Sample> perturbed,
                                   double displacement_bound, NormSpec norm)
    : base_(std::move(base)), perturbed_(std::move(perturbed)), bound_(displacement_bound), norm_(norm) {
  if (perturbed_.size() != base_.size()) {
    throw std::invalid_argument("PerturbedMeasure: perturbed points must pair with base points");
  }
  if (!(bound_ >= 0.0)) throw std::invalid_argument("PerturbedMeasure: bound must be >= 0");
}

EmpiricalMeasure PerturbedMeasure::as_measure() const {
  return EmpiricalMeasure(perturbed_, base_.weights());
}

DisplacementReport verify_displacement_bound(const PerturbedMeasure& pm) {
  DisplacementReport report;
  report.bound = pm.displacement_bound();
  const double slack = 1e-12 * std::max(1.0, report.bound);
  for (std::size_t i = 0; i < pm.size(); ++i) {
    const double d = geometry::sample_distance(pm.perturbed_points()[i], pm.base()[i], pm.norm());
    report.max_displacement = std::max(report.max_displacement, d);
    if (d > report.bound + slack) report.violations.push_back(i);
  }
  return report;
}

double sample_beta(double a, double b, Rng& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("Beta shape parameters must be positive");
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  while (true) {
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

std::vector<std::size_t> mixup_partners(std::size_t n, MixupPairing pairing, Rng& rng) {
  std::vector<std::size_t> partners(n);
  if (pairing == MixupPairing::reversed_batch) {
    for (std::size_t i = 0; i < n; ++i) partners[i] = n - 1 - i;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& p : partners) p = pick(rng);
  }
  return partners;
}

PerturbedMeasure mixup_with_rates(const EmpiricalMeasure& base, std::span<const std::size_t> partners,
                                  std::span<const double> gammas, NormSpec norm) {
  require_homogeneous(norm, "mixup");
  const std::size_t n = base.size();
  if (partners.size() != n || gammas.size() != n) {
    throw std::invalid_argument("mixup: need one partner and one mixing rate per point");
  }
  std::vector<Sample> mixed;
  mixed.reserve(n);
  double gamma_min = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gammas[i];
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("mixup: mixing rates must lie in [0, 1]");
    if (partners[i] >= n) throw std::invalid_argument("mixup: partner index out of range");
    gamma_min = std::min(gamma_min, g);
    const Sample& z = base[i];
    const Sample& w = base[partners[i]];
    mixed.emplace_back(g * z.x + (1.0 - g) * w.x, g * z.y + (1.0 - g) * w.y);
  }
  const double bound = 2.0 * (1.0 - gamma_min) * max_norm(base, norm);
  return PerturbedMeasure(base, std::move(mixed), bound, norm);
}

PerturbedMeasure mixup_perturb(const EmpiricalMeasure& base, const MixupConfig& config, Rng& rng,
                               NormSpec norm) {
  if (config.gamma_floor && !(*config.gamma_floor >= 0.0 && *config.gamma_floor <= 1.0)) {
    throw std::invalid_argument("mixup: gamma_floor must lie in [0, 1]");
  }
  const auto partners = mixup_partners(base.size(), config.pairing, rng);
  std::vector<double> gammas(base.size());
  for (double& g : gammas) {
    g = sample_beta(config.shape_a, config.shape_b, rng);
    if (config.gamma_floor) g = *config.gamma_floor + (1.0 - *config.gamma_floor) * g;
  }
  return mixup_with_rates(base, partners, gammas, norm);
}

PerturbedMeasure mask_corrupt(const EmpiricalMeasure& base, double drop_probability, Rng& rng,
                              NormSpec norm) {
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
    throw std::invalid_argument("mask_corrupt: drop probability must lie in [0, 1]");
  }
  std::bernoulli_distribution drop(drop_probability);
  std::vector<Sample> corrupted;
  corrupted.reserve(base.size());
  bool any_dropped = false;
  for (const Sample& z : base.points()) {
    Sample out = z;
    for (Eigen::Index k = 0; k < out.x.size(); ++k) {
      if (drop(rng)) {
        out.x[k] = 0.0;
        any_dropped = true;
      }
    }
    corrupted.push_back(std::move(out));
  }
  // For a 0/1 diagonal mask the operator norm of (I - D) is 1 as soon as one
  // coordinate is dropped, for every norm supported here.
  const double operator_norm = any_dropped ? 1.0 : 0.0;
  return PerturbedMeasure(base, std::move(corrupted), operator_norm * max_norm(base, norm), norm);
}

PerturbedMeasure adversarial_perturb(const EmpiricalMeasure& base,
                                     const objectives::DifferentiableLoss& loss, double budget,
                                     int steps, NormSpec norm) {
  if (!(budget > 0.0)) throw std::invalid_argument("adversarial_perturb: budget must be positive");
  if (steps < 1) throw std::invalid_argument("adversarial_perturb: steps must be >= 1");
  const bool linf = norm.kind == NormKind::sup;
  const double step_size = steps == 1 ? budget : 2.5 * budget / static_cast<double>(steps);

  auto project = [&](Vector& r) {
    if (linf) {
      r = r.cwiseMax(-budget).cwiseMin(budget);
      return;
    }
    const double len = r.norm();
    if (len > budget) r *= budget / len;
    while (r.norm() > budget) r *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
  };

  std::vector<Sample> moved;
  moved.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const Sample& z = base[i];
    Vector r = Vector::Zero(z.x.size());
    for (int s = 0; s < steps; ++s) {
      const Vector g = loss.input_gradient(Sample(z.x + r, z.y)).x;
      if (!g.allFinite()) {
        throw std::invalid_argument("adversarial_perturb: loss gradient is not finite at point " +
                                    std::to_string(i));
      }
      Vector direction;
      if (linf) {
        direction = g.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
      } else {
        const double len = g.norm();
        if (len == 0.0) break;
        direction = g / len;
      }
      r += step_size * direction;
      project(r);
    }
    moved.emplace_back(z.x + r, z.y);
  }
  return PerturbedMeasure(base, std::move(moved), budget, norm);
}

SampleSpaceSpec SampleSpaceSpec::box(std::size_t dim, double lo, double hi,
                                     std::size_t points_per_dim, NormSpec norm) {
  SampleSpaceSpec spec;
  spec.lower.assign(dim, lo);
  spec.upper.assign(dim, hi);
  spec.resolution.assign(dim, points_per_dim);
  spec.norm = norm;
  spec.validate();
  return spec;
}

void SampleSpaceSpec::validate() const {
  if (lower.empty() || lower.size() != upper.size() || lower.size() != resolution.size()) {
    throw std::invalid_argument("SampleSpaceSpec: bounds and resolution must agree in dimension");
  }
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (!(upper[k] > lower[k])) throw std::invalid_argument("SampleSpaceSpec: empty box side");
    if (resolution[k] < 2) throw std::invalid_argument("SampleSpaceSpec: need >= 2 points per side");
  }
}

double SampleSpaceSpec::diameter() const {
  Vector side(static_cast<Eigen::Index>(dimension()));
  for (std::size_t k = 0; k < dimension(); ++k) side[static_cast<Eigen::Index>(k)] = upper[k] - lower[k];
  return geometry::norm(Sample(side), norm);
}

std::size_t SampleSpaceSpec::grid_size() const {
  std::size_t total = 1;
  for (std::size_t r : resolution) total *= r;
  return total;
}

std::vector<Sample> SampleSpaceSpec::grid() const {
  validate();
  const std::size_t d = dimension();
  std::vector<Sample> points;
  points.reserve(grid_size());
  std::vector<std::size_t> index(d, 0);
  for (std::size_t count = 0; count < grid_size(); ++count) {
    Vector x(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) {
      const double t = static_cast<double>(index[k]) / static_cast<double>(resolution[k] - 1);
      x[static_cast<Eigen::Index>(k)] = index[k] + 1 == resolution[k] ? upper[k] : lower[k] + t * (upper[k] - lower[k]);
    }
    points.emplace_back(std::move(x));
    for (std::size_t k = d; k-- > 0;) {  // last coordinate varies fastest
      if (++index[k] < resolution[k]) break;
      index[k] = 0;
    }
  }
  return points;
}

Sample SampleSpaceSpec::snap(const Sample& z) const {
  if (static_cast<std::size_t>(z.x.size()) != dimension()) {
    throw std::invalid_argument("SampleSpaceSpec::snap: dimension mismatch");
  }
  Vector x(z.x.size());
  for (std::size_t k = 0; k < dimension(); ++k) {
    const double span = upper[k] - lower[k];
    const double steps = static_cast<double>(resolution[k] - 1);
    double idx = std::round((z.x[static_cast<Eigen::Index>(k)] - lower[k]) / span * steps);
    idx = std::clamp(idx, 0.0, steps);
    const double t = idx / steps;
    x[static_cast<Eigen::Index>(k)] = idx == steps ? upper[k] : lower[k] + t * span;
  }
  return Sample(std::move(x), z.y);
}

double wasserstein_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                            geometry::Order p, const NormSpec& norm) {
  if (p.is_infinite()) throw std::invalid_argument("wasserstein_distance: p must be finite");
  const std::size_t support = mu.size() + nu.size();
  if (support > kMaxTransportSupport) {
    throw std::length_error("wasserstein_distance: combined support " + std::to_string(support) +
                            " exceeds the exact-LP limit of " + std::to_string(kMaxTransportSupport));
  }
  const double q = p.value();
  Matrix cost(static_cast<Eigen::Index>(mu.size()), static_cast<Eigen::Index>(nu.size()));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(geometry::sample_distance(mu[i], nu[j], norm), q);
    }
  }
  const auto plan = transport::solve(mu.weights(), nu.weights(), cost);
  return std::pow(std::max(0.0, plan.cost), 1.0 / q);
}

}  // namespace wdro::measures
