#include "wdro/trainer.hpp"

#include <cmath>
#include <string>

#include "wdro/objectives.hpp"

namespace wdro::models {

namespace {
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kMixupStream = 3;
}  // namespace

std::size_t TrainConfig::steps() const {
  return batch_size == 0 ? 0 : (total_examples + batch_size - 1) / batch_size;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lambda_grad >= 0.0)) throw std::invalid_argument("train: lambda_grad must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw std::invalid_argument("train: ema_decay must lie in [0, 1)");
  if (!(weight_decay >= 0.0 && weight_decay < 1.0)) {
    throw std::invalid_argument("train: weight_decay must lie in [0, 1)");
  }
  if (!(adam.learning_rate >= 0.0)) throw std::invalid_argument("train: learning rate must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw std::invalid_argument("train: Adam epsilon must be positive");
  for (std::size_t k = 1; k < checkpoints.size(); ++k) {
    if (checkpoints[k] <= checkpoints[k - 1]) throw std::invalid_argument("train: checkpoints must increase");
  }
}

TrainingDiverged::TrainingDiverged(std::size_t step, const std::string& what)
    : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

TrainResult train(const data::Dataset& dataset, const Model& model, const TrainConfig& cfg,
                  const std::optional<Vector>& initial) {
  cfg.validate();
  dataset.validate();
  if (dataset.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (dataset.dimension() != model.spec().input_dim() || dataset.num_classes != model.spec().classes()) {
    throw std::invalid_argument("train: dataset shape does not match the model");
  }

  TrainResult result;
  if (initial) {
    if (initial->size() != model.parameter_count()) {
      throw ad::ShapeError("parameters", "initial vector has the wrong length");
    }
    result.initial = *initial;
  } else {
    Rng init_rng(derive_seed(cfg.seed, kInitStream));
    result.initial = init_parameters(model, init_rng);
  }
  Vector theta = result.initial;
  Vector ema = theta;
  Vector m = Vector::Zero(theta.size());
  Vector v = Vector::Zero(theta.size());

  Rng batch_rng(derive_seed(cfg.seed, kBatchStream));
  Rng mix_rng(derive_seed(cfg.seed, kMixupStream));
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);

  const std::size_t steps = cfg.steps();
  const std::size_t b = cfg.batch_size;
  TrainHistory& hist = result.history;
  hist.objective.reserve(steps);
  hist.mean_loss.reserve(steps);
  hist.penalty.reserve(steps);
  hist.gradient_norm.reserve(steps);

  std::vector<Sample> batch(b);
  std::vector<double> gammas(b, 1.0);
  double beta1_power = 1.0;
  double beta2_power = 1.0;
  std::size_t next_checkpoint = 0;

  for (std::size_t step = 1; step <= steps; ++step) {
    for (std::size_t k = 0; k < b; ++k) batch[k] = dataset.sample(pick(batch_rng));
    if (cfg.mixup) {
      double gamma_min = 1.0;
      for (std::size_t k = 0; k < b; ++k) {
        double g = measures::sample_beta(cfg.mixup->shape_a, cfg.mixup->shape_b, mix_rng);
        if (cfg.mixup->gamma_floor) g = *cfg.mixup->gamma_floor + (1.0 - *cfg.mixup->gamma_floor) * g;
        gammas[k] = g;
        gamma_min = std::min(gamma_min, g);
      }
      std::vector<Sample> mixed(b);
      for (std::size_t k = 0; k < b; ++k) {
        const Sample& z = batch[k];
        const Sample& w = batch[b - 1 - k];
        mixed[k] = Sample(gammas[k] * z.x + (1.0 - gammas[k]) * w.x, gammas[k] * z.y + (1.0 - gammas[k]) * w.y);
      }
      batch.swap(mixed);
      hist.min_mixing_rate.push_back(gamma_min);
    }

    const ad::PenalizedLoss obj = objectives::training_objective(
        model.loss_graph(), batch, std::span<const double>(theta.data(), theta.size()), cfg.lambda_grad);
    if (!std::isfinite(obj.value)) throw TrainingDiverged(step, "objective is not finite");
    if (!obj.gradient.allFinite()) throw TrainingDiverged(step, "parameter gradient is not finite");
    hist.objective.push_back(obj.value);
    hist.mean_loss.push_back(obj.mean_loss);
    hist.penalty.push_back(obj.mean_penalty);
    hist.gradient_norm.push_back(obj.gradient.norm());

    beta1_power *= cfg.adam.beta1;
    beta2_power *= cfg.adam.beta2;
    m = cfg.adam.beta1 * m + (1.0 - cfg.adam.beta1) * obj.gradient;
    v = cfg.adam.beta2 * v + (1.0 - cfg.adam.beta2) * obj.gradient.cwiseAbs2();
    const double lr = cfg.adam.learning_rate;
    const double c1 = 1.0 - beta1_power;
    const double c2 = 1.0 - beta2_power;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam.epsilon);
    }
    theta *= 1.0 - cfg.weight_decay;
    ema = cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * theta;

    if (cfg.record_parameters) hist.parameters.push_back(theta);
    while (next_checkpoint < cfg.checkpoints.size() && cfg.checkpoints[next_checkpoint] <= step) {
      if (cfg.checkpoints[next_checkpoint] == step) hist.ema_checkpoints.emplace_back(step, ema);
      ++next_checkpoint;
    }
  }
  result.raw = std::move(theta);
  result.ema = std::move(ema);
  return result;
}

}  // namespace wdro::models
