#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "wdro/sample.hpp"

namespace wdro::geometry {

/// An order p in [1, infinity], stored exactly as a reduced fraction or as
/// infinity so that conjugation round-trips without rounding.
class Order {
 public:
  /// Throws std::invalid_argument unless num/den >= 1.
  static Order rational(std::int64_t num, std::int64_t den = 1);
  static Order infinity();
  /// Nearest exact order for a floating value (integers and simple
  /// fractions with denominator <= 1000 are recovered exactly).
  static Order from_double(double p);

  bool is_infinite() const noexcept { return infinite_; }
  std::int64_t numerator() const noexcept { return num_; }
  std::int64_t denominator() const noexcept { return den_; }
  double value() const noexcept;
  std::string to_string() const;

  friend bool operator==(const Order&, const Order&) = default;

 private:
  Order() = default;
  std::int64_t num_ = 1;
  std::int64_t den_ = 1;
  bool infinite_ = false;
};

/// p* = (1 - 1/p)^-1 with 1/inf = 0 and 1/0 = inf.
Order holder_conjugate(Order p);
/// Same, for a floating order. Throws std::invalid_argument when p < 1.
Order holder_conjugate(double p);

struct HolderPair {
  Order p;
  Order p_star;
  explicit HolderPair(Order order) : p(order), p_star(holder_conjugate(order)) {}
};

enum class NormKind {
  euclidean,               // l2 over the concatenation (x, y)
  sup,                     // l-infinity over (x, y)
  product_classification,  // ||x||_2 + label_gap * I(y != 0)
};

struct NormSpec {
  NormKind kind = NormKind::euclidean;
  double label_gap = 4.0;

  static NormSpec euclidean() { return {NormKind::euclidean, 4.0}; }
  static NormSpec sup() { return {NormKind::sup, 4.0}; }
  static NormSpec product_classification(double gap = 4.0) {
    return {NormKind::product_classification, gap};
  }
};

const char* norm_name(NormKind kind);
NormKind parse_norm_kind(const std::string& name);

/// ||z|| under `spec`.
double norm(const Sample& z, const NormSpec& spec);

/// ||z1 - z2|| under `spec`. For the classification norm the label term is
/// label_gap whenever the label vectors differ.
double sample_distance(const Sample& z1, const Sample& z2, const NormSpec& spec);

/// Dual norm of a gradient with respect to z. For the classification norm
/// only the x-block enters: ||grad_z h||_* = ||grad_x h||_2.
double dual_norm(const Sample& gradient, const NormSpec& spec);

/// Plain l_p norm of a vector.
double lp_norm(std::span<const double> v, Order p);

}  // namespace wdro::geometry
