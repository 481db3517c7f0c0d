#include "wdro/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wdro::models {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::leaky_relu: return "leaky_relu";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "leaky_relu" || name == "leaky-relu") return Activation::leaky_relu;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh or leaky_relu)");
}

ModelSpec ModelSpec::mlp(Eigen::Index input, std::vector<Eigen::Index> hidden, Eigen::Index classes,
                         Activation activation) {
  ModelSpec spec;
  spec.widths.push_back(input);
  for (Eigen::Index h : hidden) spec.widths.push_back(h);
  spec.widths.push_back(classes);
  spec.activations.assign(hidden.size(), activation);
  spec.validate();
  return spec;
}

void ModelSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("model spec: need input and output widths");
  for (Eigen::Index w : widths) {
    if (w < 1) throw std::invalid_argument("model spec: every width must be >= 1");
  }
  if (activations.size() != widths.size() - 2) {
    throw std::invalid_argument("model spec: need one activation per hidden layer");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw std::invalid_argument("model spec: leaky slope must lie in [0, 1)");
  }
}

namespace {

std::shared_ptr<const ad::ComputationGraph> build_loss_graph(const ModelSpec& spec) {
  spec.validate();
  ad::GraphBuilder g;
  ad::NodeRef h = g.features(spec.input_dim());
  const ad::NodeRef y = g.label(spec.classes());
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const ad::NodeRef w = g.parameter("W" + std::to_string(l + 1), spec.widths[l + 1], spec.widths[l]);
    const ad::NodeRef b = g.parameter("b" + std::to_string(l + 1), spec.widths[l + 1], 1);
    h = g.add(g.matvec(w, h), b);
    if (l + 1 < spec.layers()) {
      h = spec.activations[l] == Activation::tanh ? g.tanh(h) : g.leaky_relu(h, spec.leaky_slope);
    }
  }
  const ad::NodeRef loss = g.softmax_cross_entropy(h, y);
  return std::make_shared<const ad::ComputationGraph>(std::move(g).build(loss));
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(std::move(spec)), graph_(build_loss_graph(spec_)) {}

Matrix Model::logits(std::span<const double> theta, const Matrix& inputs) const {
  if (static_cast<Eigen::Index>(theta.size()) != parameter_count()) {
    throw ad::ShapeError("parameters", "expected " + std::to_string(parameter_count()) + " entries, got " +
                                           std::to_string(theta.size()));
  }
  if (inputs.rows() != spec_.input_dim()) {
    throw ad::ShapeError("features", "expected " + std::to_string(spec_.input_dim()) + " rows, got " +
                                         std::to_string(inputs.rows()));
  }
  const auto& blocks = graph_->parameter_blocks();
  Matrix h = inputs;
  for (std::size_t l = 0; l < spec_.layers(); ++l) {
    const ad::ParameterBlock& wb = blocks[2 * l];
    const ad::ParameterBlock& bb = blocks[2 * l + 1];
    const Eigen::Map<const Matrix> w(theta.data() + wb.offset, wb.rows, wb.cols);
    const Eigen::Map<const Vector> b(theta.data() + bb.offset, bb.rows);
    Matrix z = w * h;
    z.colwise() += b;
    if (l + 1 < spec_.layers()) {
      if (spec_.activations[l] == Activation::tanh) {
        z = z.array().tanh().matrix();
      } else {
        const double s = spec_.leaky_slope;
        z = z.unaryExpr([s](double v) { return v >= 0.0 ? v : s * v; });
      }
    }
    h = std::move(z);
  }
  return h;
}

Vector init_parameters(const Model& model, Rng& rng) {
  Vector theta = Vector::Zero(model.parameter_count());
  for (const ad::ParameterBlock& block : model.loss_graph().parameter_blocks()) {
    if (block.cols == 1 && block.name.front() == 'b') continue;
    const double s = std::sqrt(6.0 / static_cast<double>(block.rows + block.cols));
    std::uniform_real_distribution<double> u(-s, s);
    for (Eigen::Index k = 0; k < block.size(); ++k) theta[block.offset + k] = u(rng);
  }
  return theta;
}

std::vector<bool> correct_predictions(const Model& model, std::span<const double> theta,
                                      const data::Dataset& dataset) {
  const Matrix z = model.logits(theta, dataset.features);
  std::vector<bool> correct(dataset.size());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.rows(); ++c) {
      if (z(c, j) > z(best, j)) best = c;
    }
    correct[static_cast<std::size_t>(j)] = best == dataset.labels[static_cast<std::size_t>(j)];
  }
  return correct;
}

double evaluate_accuracy(const Model& model, std::span<const double> theta, const data::Dataset& dataset) {
  if (dataset.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  const auto correct = correct_predictions(model, theta, dataset);
  const auto hits = std::count(correct.begin(), correct.end(), true);
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("quartiles: empty input");
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.25), quantile_sorted(values, 0.5), quantile_sorted(values, 0.75)};
}

double median(std::vector<double> values) { return quartiles(std::move(values)).median; }

GradientProfile gradient_norm_profile(const Model& model, std::span<const double> theta,
                                      const data::Dataset& dataset) {
  GradientProfile profile;
  profile.norms.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Vector g = ad::input_gradient(model.loss_graph(), dataset.sample(i), theta);
    profile.norms.push_back(g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff());
  }
  if (!profile.norms.empty()) profile.summary = quartiles(profile.norms);
  return profile;
}

}  // namespace wdro::models
