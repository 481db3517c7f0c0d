#pragma once

// Experiment configuration. Files are JSON objects with the sections
// "experiment", "data", "model", "train", "rate_study" and "sweep"; every
// key is optional and falls back to the defaults below. Unknown keys are
// rejected so typos do not silently fall back.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/model.hpp"
#include "wdro/trainer.hpp"

namespace wdro::experiments {

enum class Method { erm, wdro, mixup, wdro_mix };

const char* method_name(Method m);
Method parse_method(const std::string& name);
bool uses_penalty(Method m);
bool uses_mixup(Method m);

struct ExperimentSection {
  std::vector<Method> methods{Method::erm, Method::wdro, Method::mixup, Method::wdro_mix};
  std::size_t trials = 5;
  std::uint64_t data_seed = 1;
  std::uint64_t train_seed = 2;
  std::uint64_t contamination_seed = 3;
  std::vector<double> contamination{0.01, 0.02};
  /// Contamination level that defines the C1 / C2 split.
  double category_level = 0.01;
  /// Number of evenly spaced training checkpoints profiled by grad-analysis.
  std::size_t gradient_checkpoints = 4;
  std::size_t histogram_bins = 40;
};

struct DataSection {
  std::string source = "synthetic";  // synthetic | file
  data::Generator generator = data::Generator::low_res_digits;
  std::size_t n_train = 2000;
  std::size_t n_test = 4000;
  Eigen::Index dimension = 64;
  int classes = 10;
  double noise = 0.8;
  std::string path;           // file source
  std::string format = "csv"; // csv | idx
  std::string test_path;      // optional separate test file
  double test_fraction = 0.25;
};

struct ModelSection {
  std::vector<Eigen::Index> hidden{64, 64};
  models::Activation activation = models::Activation::tanh;
  double leaky_slope = 0.01;
};

struct TrainSection {
  std::size_t batch_size = 64;
  double lambda_grad = 1.0;
  double learning_rate = 0.002;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double ema_decay = 0.999;
  double weight_decay = 4e-5;
  std::size_t total_examples = 50000;
  double mixup_shape_a = 0.5;
  double mixup_shape_b = 0.5;
};

struct RateStudySection {
  std::int64_t order = 4;
  double alpha_max = 0.2;
  double alpha_min = 0.0125;
  std::size_t alpha_count = 5;
  std::size_t grid_points = 30001;
  double lower = -1.5;
  double upper = 1.5;
  std::size_t centers = 8;
  std::size_t hidden = 8;
  std::uint64_t seed = 4;
  /// Displacement schedule beta = beta_scale * alpha^beta_power.
  double beta_scale = 1.0;
  double beta_power = 2.0;
};

struct SweepSection {
  Method method = Method::wdro;
  std::vector<double> lambda_grad{0.004, 0.016, 0.064};
};

struct ExperimentConfig {
  ExperimentSection experiment;
  DataSection data;
  ModelSection model;
  TrainSection train;
  RateStudySection rate_study;
  SweepSection sweep;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration as pretty-printed JSON with sorted keys.
std::string to_json(const ExperimentConfig& cfg);
/// Applies a JSON object of overrides (same layout) on top of `base`.
ExperimentConfig merge_config(const ExperimentConfig& base, const std::string& json_overrides);

/// Stable 64-bit FNV-1a hash of the resolved configuration, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// TrainConfig for one method and trial.
models::TrainConfig train_config(const ExperimentConfig& cfg, Method method, std::size_t trial);

}  // namespace wdro::experiments
