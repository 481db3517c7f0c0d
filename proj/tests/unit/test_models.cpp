#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "wdro/model.hpp"
#include "wdro/trainer.hpp"

using namespace wdro;
using namespace wdro::models;

namespace {

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

data::Dataset blobs(std::size_t n, std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.generator = data::Generator::gaussian_blobs;
  spec.n = n;
  spec.seed = seed;
  return data::generate(spec);
}

data::Dataset two_points() {
  data::Dataset ds;
  ds.features = Matrix(1, 2);
  ds.features << -1.0, 1.0;
  ds.labels = {0, 1};
  ds.num_classes = 2;
  return ds;
}

TrainConfig small_config(std::size_t total, std::uint64_t seed) {
  TrainConfig c;
  c.batch_size = 16;
  c.total_examples = total;
  c.seed = seed;
  c.adam.learning_rate = 0.01;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "wdro_model_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(ModelSpec, RejectsZeroWidth) {
  EXPECT_THROW(Model(ModelSpec::mlp(2, {0}, 3)), std::invalid_argument);
  EXPECT_THROW(Model(ModelSpec::mlp(0, {4}, 3)), std::invalid_argument);
}

TEST(Init, SameSeedSameParameters) {
  const Model model(ModelSpec::mlp(4, {8, 8}, 3));
  Rng a(42), b(42);
  EXPECT_EQ(init_parameters(model, a), init_parameters(model, b));
}

TEST(Init, WeightScaleFollowsFanRule) {
  const Model model(ModelSpec::mlp(64, {64, 64}, 10));
  const auto& widths = model.spec().widths;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Vector theta = init_parameters(model, rng);
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const Eigen::Index rows = widths[l + 1], cols = widths[l];
      const auto w = theta.segment(offset, rows * cols);
      const double mean = w.mean();
      const double sd = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(w.size() - 1));
      const double rule = std::sqrt(2.0 / static_cast<double>(rows + cols));
      EXPECT_NEAR(sd / rule, 1.0, 0.2) << "seed " << seed << " layer " << l;
      const auto b = theta.segment(offset + rows * cols, rows);
      EXPECT_EQ(b, Vector::Zero(rows));
      offset += rows * cols + rows;
    }
    EXPECT_EQ(offset, theta.size());
  }
}

TEST(Model, FastLogitsMatchGraph) {
  const Model model(ModelSpec::mlp(2, {5}, 4));
  Rng rng(1);
  const Vector theta = init_parameters(model, rng);
  const auto ds = blobs(8, 3);
  const Matrix logits = model.logits(view(theta), ds.features);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sample z = ds.sample(i);
    const Eigen::Index c = static_cast<Eigen::Index>(i);
    const Vector l = logits.col(c);
    const double lse = std::log((l.array() - l.maxCoeff()).exp().sum()) + l.maxCoeff();
    EXPECT_NEAR(ad::evaluate(model.loss_graph(), z, view(theta)), lse - l[ds.labels[i]], 1e-12);
  }
}

TEST(Accuracy, ConstantLogitsPredictClassZero) {
  const Model model(ModelSpec::mlp(1, {}, 2));
  const Vector theta = Vector::Zero(model.parameter_count());
  EXPECT_DOUBLE_EQ(evaluate_accuracy(model, view(theta), two_points()), 0.5);
}

TEST(Accuracy, InvariantUnderShuffling) {
  const Model model(ModelSpec::mlp(2, {6}, 4));
  Rng rng(2);
  const Vector theta = init_parameters(model, rng);
  const auto ds = blobs(200, 5);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  EXPECT_DOUBLE_EQ(evaluate_accuracy(model, view(theta), ds), evaluate_accuracy(model, view(theta), ds.subset(order)));
}

TEST(GradientProfile, ConstantModelIsZero) {
  const Model model(ModelSpec::mlp(2, {4}, 4));
  const Vector theta = Vector::Zero(model.parameter_count());
  const auto p = gradient_norm_profile(model, view(theta), blobs(20, 1));
  EXPECT_EQ(p.summary.q1, 0.0);
  EXPECT_EQ(p.summary.median, 0.0);
  EXPECT_EQ(p.summary.q3, 0.0);
}

TEST(GradientProfile, PermutationEquivariant) {
  const Model model(ModelSpec::mlp(2, {4}, 4));
  Rng rng(3);
  const Vector theta = init_parameters(model, rng);
  const auto ds = blobs(30, 2);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.rbegin(), order.rend(), 0);
  const auto a = gradient_norm_profile(model, view(theta), ds);
  const auto b = gradient_norm_profile(model, view(theta), ds.subset(order));
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(b.norms[i], a.norms[order[i]]);
}

TEST(Quartiles, LinearInterpolation) {
  const auto q = quartiles({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(q.q1, 1.75);
  EXPECT_DOUBLE_EQ(q.median, 2.5);
  EXPECT_DOUBLE_EQ(q.q3, 3.25);
  EXPECT_THROW(quartiles({}), std::invalid_argument);
}

TEST(Trainer, ZeroStepsKeepsInitialParameters) {
  const auto ds = blobs(40, 1);
  const Model model(ModelSpec::mlp(2, {4}, 4));
  const auto r = train(ds, model, small_config(0, 1));
  EXPECT_EQ(r.raw, r.initial);
  EXPECT_EQ(r.ema, r.initial);
  EXPECT_TRUE(r.history.objective.empty());
}

TEST(Trainer, Deterministic) {
  const auto ds = blobs(100, 2);
  const Model model(ModelSpec::mlp(2, {6}, 4));
  auto cfg = small_config(640, 9);
  cfg.lambda_grad = 0.1;
  cfg.mixup = measures::MixupConfig{};
  cfg.record_parameters = true;
  const auto a = train(ds, model, cfg);
  const auto b = train(ds, model, cfg);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.ema, b.ema);
  EXPECT_EQ(a.history.objective, b.history.objective);
  EXPECT_EQ(a.history.penalty, b.history.penalty);
  EXPECT_EQ(a.history.min_mixing_rate, b.history.min_mixing_rate);
  EXPECT_EQ(a.history.parameters, b.history.parameters);
}

TEST(Trainer, ZeroPenaltyMatchesReferenceErmLoop) {
  const auto ds = blobs(60, 4);
  const Model model(ModelSpec::mlp(2, {5}, 4));
  auto cfg = small_config(160, 3);
  cfg.lambda_grad = 0.0;
  const auto r = train(ds, model, cfg);

  // Independent Adam + weight decay + EMA loop on the plain mean loss.
  Vector theta = r.initial, ema = theta;
  Vector m = Vector::Zero(theta.size()), v = Vector::Zero(theta.size());
  Rng batch_rng(derive_seed(cfg.seed, 2));
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  for (std::size_t t = 1; t <= cfg.steps(); ++t) {
    Vector g = Vector::Zero(theta.size());
    for (std::size_t k = 0; k < cfg.batch_size; ++k) {
      g += ad::parameter_gradient(model.loss_graph(), ds.sample(pick(batch_rng)), view(theta));
    }
    g /= static_cast<double>(cfg.batch_size);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(0.9, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(0.999, static_cast<double>(t));
    theta.array() -= cfg.adam.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam.epsilon);
    theta *= 1.0 - cfg.weight_decay;
    ema = cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * theta;
  }
  EXPECT_LE((theta - r.raw).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((ema - r.ema).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Trainer, ZeroLearningRateGivesClosedFormDecayAndEma) {
  const auto ds = blobs(30, 5);
  const Model model(ModelSpec::mlp(2, {3}, 4));
  auto cfg = small_config(16 * 50, 6);
  cfg.adam.learning_rate = 0.0;
  cfg.weight_decay = 0.01;
  cfg.ema_decay = 0.9;
  const auto r = train(ds, model, cfg);
  const double T = 50.0;
  const double d = 1.0 - cfg.weight_decay, b = cfg.ema_decay;
  EXPECT_LE((r.raw - r.initial * std::pow(d, T)).cwiseAbs().maxCoeff(), 1e-14);
  double coef = std::pow(b, T);
  for (int t = 1; t <= 50; ++t) coef += (1.0 - b) * std::pow(b, T - t) * std::pow(d, t);
  EXPECT_LE((r.ema - r.initial * coef).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Trainer, SeparablePairIsLearned) {
  const auto ds = two_points();
  const Model model(ModelSpec::mlp(1, {}, 2));
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.total_examples = 2 * 3000;
  cfg.adam.learning_rate = 0.05;
  cfg.weight_decay = 0.0;
  cfg.seed = 1;
  const auto r = train(ds, model, cfg, Vector::Zero(model.parameter_count()));
  EXPECT_DOUBLE_EQ(evaluate_accuracy(model, view(r.raw), ds), 1.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) loss += ad::evaluate(model.loss_graph(), ds.sample(i), view(r.raw));
  EXPECT_LT(loss / 2.0, 0.01);

  // Plain full-batch gradient descent on the same logistic problem also separates it.
  double w = 0.0;
  for (int it = 0; it < 20000; ++it) w += 0.5 * (1.0 / (1.0 + std::exp(2.0 * w)));
  EXPECT_LT(std::log1p(std::exp(-2.0 * w)), 0.01);
}

TEST(Trainer, DivergenceIsReported) {
  const auto ds = blobs(20, 1);
  const Model model(ModelSpec::mlp(2, {4}, 4));
  Vector bad = Vector::Zero(model.parameter_count());
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train(ds, model, small_config(32, 1), bad), TrainingDiverged);
}

TEST(Trainer, CheckpointsCaptureEma) {
  const auto ds = blobs(50, 1);
  const Model model(ModelSpec::mlp(2, {4}, 4));
  auto cfg = small_config(16 * 10, 2);
  cfg.checkpoints = {5, 10};
  const auto r = train(ds, model, cfg);
  ASSERT_EQ(r.history.ema_checkpoints.size(), 2u);
  EXPECT_EQ(r.history.ema_checkpoints[1].first, 10u);
  EXPECT_EQ(r.history.ema_checkpoints[1].second, r.ema);
}

TEST(Checkpoint, RoundTrip) {
  Checkpoint c{ModelSpec::mlp(3, {5, 4}, 2, Activation::leaky_relu), {}};
  c.spec.leaky_slope = 0.2;
  const Model model(c.spec);
  Rng rng(4);
  c.parameters = {init_parameters(model, rng), init_parameters(model, rng)};
  const auto path = temp_path("round.ckpt");
  write_checkpoint(c, path, "{\"note\": 1}\n");
  const auto back = read_checkpoint(path);
  EXPECT_EQ(back.spec, c.spec);
  EXPECT_EQ(back.parameters, c.parameters);
  EXPECT_TRUE(std::filesystem::exists(path.string() + ".json"));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = temp_path("bad.ckpt");
  std::ofstream(path, std::ios::binary) << "NOTACKPT0000";
  try {
    read_checkpoint(path);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos) << e.what();
  }
  Checkpoint c{ModelSpec::mlp(1, {}, 2), {Vector::Zero(4)}};
  write_checkpoint(c, path);
  std::ofstream(path, std::ios::binary | std::ios::app) << 'x';
  EXPECT_THROW(read_checkpoint(path), std::runtime_error);
}
