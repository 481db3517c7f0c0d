#include "wdro/geometry.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wdro {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 finalizer over a combination of the three words.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

}  // namespace wdro

namespace wdro::geometry {

Order Order::rational(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < den) {
    throw std::invalid_argument("order must satisfy p >= 1, got " + std::to_string(num) + "/" +
                                std::to_string(den));
  }
  const std::int64_t g = std::gcd(num, den);
  Order p;
  p.num_ = num / g;
  p.den_ = den / g;
  return p;
}

Order Order::infinity() {
  Order p;
  p.infinite_ = true;
  p.num_ = 1;
  p.den_ = 0;
  return p;
}

Order Order::from_double(double p) {
  if (std::isinf(p) && p > 0) return infinity();
  if (!(p >= 1.0)) throw std::invalid_argument("order must satisfy p >= 1, got " + std::to_string(p));
  for (std::int64_t den = 1; den <= 1000; ++den) {
    const double num = std::round(p * static_cast<double>(den));
    if (std::abs(num / static_cast<double>(den) - p) <= 1e-12 * p) {
      return rational(static_cast<std::int64_t>(num), den);
    }
  }
  throw std::invalid_argument("order " + std::to_string(p) + " has no exact representation");
}

double Order::value() const noexcept {
  if (infinite_) return std::numeric_limits<double>::infinity();
  return static_cast<double>(num_) / static_cast<double>(den_);
}

std::string Order::to_string() const {
  if (infinite_) return "inf";
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Order holder_conjugate(Order p) {
  if (p.is_infinite()) return Order::rational(1);
  if (p.numerator() == p.denominator()) return Order::infinity();
  // (1 - d/n)^-1 = n / (n - d)
  return Order::rational(p.numerator(), p.numerator() - p.denominator());
}

Order holder_conjugate(double p) { return holder_conjugate(Order::from_double(p)); }

const char* norm_name(NormKind kind) {
  switch (kind) {
    case NormKind::euclidean: return "euclidean";
    case NormKind::sup: return "sup";
    case NormKind::product_classification: return "product_classification";
  }
  return "unknown";
}

NormKind parse_norm_kind(const std::string& name) {
  if (name == "euclidean") return NormKind::euclidean;
  if (name == "sup") return NormKind::sup;
  if (name == "product_classification") return NormKind::product_classification;
  throw std::invalid_argument("unknown norm '" + name + "'");
}

double norm(const Sample& z, const NormSpec& spec) {
  switch (spec.kind) {
    case NormKind::euclidean: return std::sqrt(z.x.squaredNorm() + z.y.squaredNorm());
    case NormKind::sup: {
      double m = 0.0;
      if (z.x.size() > 0) m = std::max(m, z.x.cwiseAbs().maxCoeff());
      if (z.y.size() > 0) m = std::max(m, z.y.cwiseAbs().maxCoeff());
      return m;
    }
    case NormKind::product_classification: {
      const bool label_nonzero = z.y.size() > 0 && !z.y.isZero(0.0);
      return z.x.norm() + (label_nonzero ? spec.label_gap : 0.0);
    }
  }
  return 0.0;
}

double sample_distance(const Sample& z1, const Sample& z2, const NormSpec& spec) {
  if (z1.x.size() != z2.x.size() || z1.y.size() != z2.y.size()) {
    throw std::invalid_argument("sample_distance: samples live in different spaces");
  }
  if (spec.kind == NormKind::product_classification) {
    return (z1.x - z2.x).norm() + (z1.y == z2.y ? 0.0 : spec.label_gap);
  }
  return norm(Sample(z1.x - z2.x, z1.y - z2.y), spec);
}

double dual_norm(const Sample& gradient, const NormSpec& spec) {
  switch (spec.kind) {
    case NormKind::euclidean: return std::sqrt(gradient.x.squaredNorm() + gradient.y.squaredNorm());
    case NormKind::sup: return gradient.x.lpNorm<1>() + gradient.y.lpNorm<1>();
    case NormKind::product_classification: return gradient.x.norm();
  }
  return 0.0;
}

double lp_norm(std::span<const double> v, Order p) {
  if (p.is_infinite()) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  }
  const double q = p.value();
  double s = 0.0;
  for (double e : v) s += std::pow(std::abs(e), q);
  return std::pow(s, 1.0 / q);
}

}  // namespace wdro::geometry
