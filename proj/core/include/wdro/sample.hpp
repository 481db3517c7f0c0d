#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace wdro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Pseudo-random engine used by every generator in the library. All
/// randomness flows through explicitly passed instances of this type.
using Rng = std::mt19937_64;

/// A point z = (x, y) of the sample space. `y` is empty for unlabelled
/// spaces (the oracle studies) and a one-hot or soft label vector for
/// classification.
struct Sample {
  Vector x;
  Vector y;

  Sample() = default;
  explicit Sample(Vector features) : x(std::move(features)) {}
  Sample(Vector features, Vector label) : x(std::move(features)), y(std::move(label)) {}

  friend bool operator==(const Sample& a, const Sample& b) {
    return a.x.size() == b.x.size() && a.y.size() == b.y.size() && a.x == b.x && a.y == b.y;
  }
};

/// Derives an independent 64-bit seed for a named sub-stream. Used to give
/// every (trial, method, purpose) its own reproducible generator.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace wdro
