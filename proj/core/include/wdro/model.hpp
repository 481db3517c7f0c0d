#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wdro/autodiff.hpp"
#include "wdro/dataset.hpp"
#include "wdro/sample.hpp"

namespace wdro::models {

enum class Activation : std::uint8_t { tanh = 0, leaky_relu = 1 };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// Fully connected classifier. widths = {d0, d1, ..., dJ} with d0 the input
/// dimension and dJ the class count; one activation per hidden layer.
struct ModelSpec {
  std::vector<Eigen::Index> widths;
  std::vector<Activation> activations;
  double leaky_slope = 0.01;

  /// Hidden layers share one activation.
  static ModelSpec mlp(Eigen::Index input, std::vector<Eigen::Index> hidden, Eigen::Index classes,
                       Activation activation = Activation::tanh);
  void validate() const;
  Eigen::Index input_dim() const { return widths.front(); }
  Eigen::Index classes() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// A ModelSpec together with its loss graph h_theta(x, y) = CE(y, f_theta(x)).
/// Parameters are laid out as W1, b1, W2, b2, ... with every matrix stored
/// column-major.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const ad::ComputationGraph& loss_graph() const { return *graph_; }
  std::shared_ptr<const ad::ComputationGraph> shared_graph() const { return graph_; }
  Eigen::Index parameter_count() const { return graph_->parameter_count(); }

  /// Logits for every column of `inputs` (dimension x count).
  Matrix logits(std::span<const double> theta, const Matrix& inputs) const;

 private:
  ModelSpec spec_;
  std::shared_ptr<const ad::ComputationGraph> graph_;
};

/// Weights uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out)); biases zero.
Vector init_parameters(const Model& model, Rng& rng);

/// Fraction of examples whose argmax logit (lowest index on ties) matches
/// the label.
double evaluate_accuracy(const Model& model, std::span<const double> theta, const data::Dataset& dataset);

/// Per-example correctness under the same rule.
std::vector<bool> correct_predictions(const Model& model, std::span<const double> theta,
                                      const data::Dataset& dataset);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Linear-interpolation quantiles (type 7). Throws on an empty input.
Quartiles quartiles(std::vector<double> values);
double median(std::vector<double> values);

struct GradientProfile {
  std::vector<double> norms;  // ||grad_x h(x_i, y_i)||_inf per example
  Quartiles summary;
};

GradientProfile gradient_norm_profile(const Model& model, std::span<const double> theta,
                                      const data::Dataset& dataset);

// ---------------------------------------------------------------------------
// Checkpoints.

/// Binary layout, all integers and floats little-endian:
///   8 bytes  "WDROCKPT"
///   u32      format version (1)
///   u32      number of widths L + 1, then L + 1 u32 widths
///   u8 x (L - 1) hidden activations, f64 leaky slope
///   u32      number of parameter vectors V, then V times:
///            u64 length, length x f64
struct Checkpoint {
  ModelSpec spec;
  std::vector<Vector> parameters;  // e.g. {raw, ema}
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Also writes `path` + ".json" holding `config_json` when non-empty.
void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path,
                      const std::string& config_json);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace wdro::models
