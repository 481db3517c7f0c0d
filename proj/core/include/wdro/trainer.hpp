#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/measures.hpp"
#include "wdro/model.hpp"

namespace wdro::models {

struct AdamConfig {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double lambda_grad = 0.004;
  /// Mixup inside each batch with the reversed-batch partner when set.
  std::optional<measures::MixupConfig> mixup;
  AdamConfig adam;
  double ema_decay = 0.999;
  /// Multiplicative shrink applied to the raw parameters after every update.
  double weight_decay = 4e-5;
  std::size_t total_examples = 50000;
  std::uint64_t seed = 0;
  /// Keep the raw parameters after every step in the history.
  bool record_parameters = false;
  /// Steps (1-based) after which the EMA parameters are snapshotted.
  std::vector<std::size_t> checkpoints;

  std::size_t steps() const;
  void validate() const;
};

struct TrainHistory {
  std::vector<double> objective;     // per step, before the update
  std::vector<double> mean_loss;
  std::vector<double> penalty;       // mean ||grad_x h||_2^2 over the batch
  std::vector<double> gradient_norm; // ||d objective / d theta||_2
  std::vector<double> min_mixing_rate;  // per step with Mixup, else empty
  std::vector<Vector> parameters;    // raw theta after each step when recorded
  std::vector<std::pair<std::size_t, Vector>> ema_checkpoints;
};

struct TrainResult {
  Vector initial;
  Vector raw;
  Vector ema;
  TrainHistory history;
};

/// Raised when the objective or its gradient stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Minibatch training of CE + lambda_grad * mean ||grad_x h||^2 with Adam,
/// multiplicative weight decay and a parameter EMA initialised at theta_0.
/// Parameters are initialised from `cfg.seed` unless `initial` is given.
TrainResult train(const data::Dataset& dataset, const Model& model, const TrainConfig& cfg,
                  const std::optional<Vector>& initial = std::nullopt);

}  // namespace wdro::models
