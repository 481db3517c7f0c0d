#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wdro/geometry.hpp"
#include "wdro/sample.hpp"

namespace wdro::objectives {
class DifferentiableLoss;
}

namespace wdro::measures {

/// Finite weighted point set. Weights are non-negative and sum to one
/// (within 1e-12); the default is uniform.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(std::vector<Sample> points);
  EmpiricalMeasure(std::vector<Sample> points, std::vector<double> weights);

  const std::vector<Sample>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return points_.size(); }
  const Sample& operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<Sample> points_;
  std::vector<double> weights_;
};

/// Base measure paired index-for-index with displaced points, plus the
/// recorded displacement bound beta in units of `norm`.
class PerturbedMeasure {
 public:
  PerturbedMeasure(EmpiricalMeasure base, std::vector<Sample> perturbed, double displacement_bound,
                   geometry::NormSpec norm = {});

  const EmpiricalMeasure& base() const { return base_; }
  const std::vector<Sample>& perturbed_points() const { return perturbed_; }
  double displacement_bound() const { return bound_; }
  const geometry::NormSpec& norm() const { return norm_; }
  std::size_t size() const { return perturbed_.size(); }

  /// The perturbed points with the base weights.
  EmpiricalMeasure as_measure() const;

 private:
  EmpiricalMeasure base_;
  std::vector<Sample> perturbed_;
  double bound_;
  geometry::NormSpec norm_;
};

struct DisplacementReport {
  double max_displacement = 0.0;
  double bound = 0.0;
  std::vector<std::size_t> violations;  // indices with ||z'_i - z_i|| > bound
  bool ok() const { return violations.empty(); }
};

/// Measures every ||z'_i - z_i||. A violation needs to exceed the recorded
/// bound by more than 1e-12 relative (rounding slack of the generators).
DisplacementReport verify_displacement_bound(const PerturbedMeasure& pm);

enum class MixupPairing { reversed_batch, uniform_random };

struct MixupConfig {
  double shape_a = 0.5;  // Beta(shape_a, shape_b)
  double shape_b = 0.5;
  MixupPairing pairing = MixupPairing::reversed_batch;
  /// When set, raw Beta draws g are mapped to floor + (1 - floor) * g so every
  /// mixing rate is at least `gamma_floor`.
  std::optional<double> gamma_floor;
};

/// Beta(a, b) via two Gamma draws.
double sample_beta(double a, double b, Rng& rng);

/// Partner index of each point under the pairing rule.
std::vector<std::size_t> mixup_partners(std::size_t n, MixupPairing pairing, Rng& rng);

/// z'_i = gamma_i z_i + (1 - gamma_i) z_{partner_i}; the bound recorded is
/// 2 (1 - min gamma) C with C the largest norm among the base points.
/// The norm must be homogeneous, so the classification product norm is rejected.
PerturbedMeasure mixup_with_rates(const EmpiricalMeasure& base, std::span<const std::size_t> partners,
                                  std::span<const double> gammas, geometry::NormSpec norm = {});

PerturbedMeasure mixup_perturb(const EmpiricalMeasure& base, const MixupConfig& config, Rng& rng,
                               geometry::NormSpec norm = {});

/// Drops each feature coordinate independently with `drop_probability`
/// (labels untouched). The bound is D C where D is 1 if any coordinate was
/// dropped anywhere and 0 otherwise.
PerturbedMeasure mask_corrupt(const EmpiricalMeasure& base, double drop_probability, Rng& rng,
                              geometry::NormSpec norm = {});

/// Projected steepest ascent on the loss within a feature-space ball of
/// radius `budget` (l2 for euclidean/classification norms, l-inf for sup).
/// One step moves straight to the boundary along the ascent direction.
PerturbedMeasure adversarial_perturb(const EmpiricalMeasure& base,
                                     const objectives::DifferentiableLoss& loss, double budget,
                                     int steps, geometry::NormSpec norm = {});

/// Bounded box with a product grid used to discretize the sample space.
struct SampleSpaceSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> resolution;  // grid points per coordinate (>= 2)
  geometry::NormSpec norm;

  static SampleSpaceSpec box(std::size_t dim, double lo, double hi, std::size_t points_per_dim,
                             geometry::NormSpec norm = {});

  std::size_t dimension() const { return lower.size(); }
  double diameter() const;
  std::size_t grid_size() const;
  std::vector<Sample> grid() const;
  /// Nearest grid point (per-coordinate rounding).
  Sample snap(const Sample& z) const;
  void validate() const;
};

/// Largest number of support points (both measures together) accepted by
/// wasserstein_distance.
inline constexpr std::size_t kMaxTransportSupport = 64;

/// Exact W_p between two discrete measures via the transportation simplex.
/// Throws std::length_error when the combined support exceeds
/// kMaxTransportSupport, std::invalid_argument when p is infinite.
double wasserstein_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                            geometry::Order p, const geometry::NormSpec& norm);

}  // namespace wdro::measures
