#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wdro/objectives.hpp"

using namespace wdro;
using namespace wdro::objectives;
using wdro::fixtures::labelled;
using wdro::fixtures::point;

namespace {

// h(x) = x^2 / 2 - 2.5: values -2, 2 and gradients 1, 3 at x = 1, 3.
fixtures::OwnedLoss shifted_half_square() { return fixtures::quadratic_loss(1, 0.5, -2.5); }

SurrogateConfig config(double alpha, geometry::Order p) {
  SurrogateConfig c;
  c.alpha = alpha;
  c.order = p;
  return c;
}

}  // namespace

TEST(Risk, ConstantLoss) {
  auto h = fixtures::constant_loss(2, 1.25);
  const measures::EmpiricalMeasure m({point({0.1, 0.2}), point({0.3, -0.4})});
  EXPECT_DOUBLE_EQ(risk(m, *h), 1.25);
}

TEST(Risk, TwoPointAverage) {
  auto h = fixtures::identity_loss();
  EXPECT_DOUBLE_EQ(risk(measures::EmpiricalMeasure({point({0.0}), point({1.0})}), *h), 0.5);
}

TEST(Risk, IdentityPerturbationMatchesBase) {
  Rng rng(1);
  auto net = fixtures::tanh_network(2, 4, rng);
  const measures::EmpiricalMeasure m({point({0.1, 0.2}), point({-0.5, 0.7})});
  const measures::PerturbedMeasure pm(m, m.points(), 0.0);
  EXPECT_DOUBLE_EQ(risk(pm, *net), risk(m, *net));
}

TEST(GradientPenalty, SqrtFive) {
  auto h = shifted_half_square();
  const measures::EmpiricalMeasure m({point({1.0}), point({3.0})});
  EXPECT_NEAR(gradient_penalty(m, *h, geometry::Order::rational(2), {}), std::sqrt(5.0), 1e-15);
}

TEST(GradientPenalty, ConstantLossIsZero) {
  auto h = fixtures::constant_loss(1, 3.0);
  const measures::EmpiricalMeasure m({point({1.0}), point({3.0})});
  EXPECT_EQ(gradient_penalty(m, *h, geometry::Order::rational(2), {}), 0.0);
}

TEST(GradientPenalty, OrderOneIsMeanNorm) {
  auto h = shifted_half_square();
  const measures::EmpiricalMeasure m({point({1.0}), point({3.0})});
  EXPECT_DOUBLE_EQ(gradient_penalty(m, *h, geometry::Order::rational(1), {}), 2.0);
  EXPECT_DOUBLE_EQ(gradient_penalty(m, *h, geometry::Order::infinity(), {}), 3.0);
}

TEST(Surrogate, ZeroRadiusIsRisk) {
  Rng rng(2);
  auto net = fixtures::tanh_network(2, 4, rng);
  const measures::EmpiricalMeasure m({point({0.1, 0.2}), point({-0.5, 0.7})});
  EXPECT_EQ(surrogate_risk(m, *net, config(0.0, geometry::Order::rational(2))), risk(m, *net));
}

TEST(Surrogate, ComposesRiskAndPenalty) {
  auto h = shifted_half_square();
  const measures::EmpiricalMeasure m({point({1.0}), point({3.0})});
  EXPECT_DOUBLE_EQ(risk(m, *h), 0.0);
  EXPECT_NEAR(surrogate_risk(m, *h, config(0.1, geometry::Order::rational(2))), 0.22360679774997896, 1e-15);
}

TEST(Surrogate, NeverBelowRisk) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = fixtures::tanh_network(2, 5, rng);
    const measures::EmpiricalMeasure m({point({u(rng), u(rng)}), point({u(rng), u(rng)})});
    for (double a : {0.0, 0.05, 0.5}) {
      EXPECT_GE(surrogate_risk(m, *net, config(a, geometry::Order::rational(4))), risk(m, *net));
    }
  }
}

TEST(Surrogate, PerturbedIdentityMatchesClean) {
  Rng rng(4);
  auto net = fixtures::tanh_network(2, 4, rng);
  const measures::EmpiricalMeasure m({point({0.1, 0.2}), point({-0.5, 0.7}), point({0.3, -0.9})});
  const auto cfg = config(0.1, geometry::Order::rational(2));
  const measures::PerturbedMeasure identity(m, m.points(), 0.0);
  EXPECT_DOUBLE_EQ(perturbed_surrogate_risk(identity, *net, cfg), surrogate_risk(m, *net, cfg));
  const std::vector<std::size_t> partners{2, 1, 0};
  const std::vector<double> ones{1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(perturbed_surrogate_risk(measures::mixup_with_rates(m, partners, ones), *net, cfg),
                   surrogate_risk(m, *net, cfg));
}

TEST(Surrogate, RejectsUnsupportedOrders) {
  EXPECT_THROW(config(0.1, geometry::Order::rational(1)).validate(), std::invalid_argument);
  EXPECT_THROW(config(-0.1, geometry::Order::rational(2)).validate(), std::invalid_argument);
}

namespace {

// Two-class logits (theta x, 0) with softmax cross-entropy.
ad::ComputationGraph scalar_classifier() {
  ad::GraphBuilder g;
  const auto x = g.features(1);
  const auto y = g.label(2);
  const auto w = g.parameter("theta", 1, 1);
  Matrix pad = Matrix::Zero(2, 1);
  pad(0, 0) = 1.0;
  const auto logits = g.matvec(g.constant(pad), g.matvec(w, x));
  return std::move(g).build(g.softmax_cross_entropy(logits, y));
}

}  // namespace

TEST(TrainingObjective, ZeroWeightIsCrossEntropy) {
  const auto graph = scalar_classifier();
  const Vector theta = Vector::Constant(1, 0.8);
  const std::vector<Sample> batch{labelled({0.5}, 2, 0), labelled({-1.0}, 2, 1)};
  const auto r = training_objective(graph, batch, {theta.data(), 1}, 0.0);
  double ce = 0.0;
  for (const auto& z : batch) {
    const double s = 0.8 * z.x[0];
    const double lse = std::log(std::exp(s) + 1.0);
    ce += lse - (z.y[0] == 1.0 ? s : 0.0);
  }
  EXPECT_NEAR(r.value, ce / 2.0, 1e-14);
  EXPECT_EQ(r.mean_penalty, 0.0);
}

TEST(TrainingObjective, ConfidentPredictionHasZeroLoss) {
  const auto graph = scalar_classifier();
  const Vector theta = Vector::Constant(1, 1000.0);
  const std::vector<Sample> batch{labelled({1.0}, 2, 0)};
  EXPECT_EQ(training_objective(graph, batch, {theta.data(), 1}, 0.0).value, 0.0);
}

TEST(TrainingObjective, ScalarModelClosedForm) {
  const auto graph = scalar_classifier();
  const double theta = 0.8, lambda = 0.3;
  const Vector th = Vector::Constant(1, theta);
  const std::vector<Sample> batch{labelled({0.5}, 2, 0), labelled({-1.0}, 2, 1), labelled({2.0}, 2, 1)};
  double ce = 0.0, pen = 0.0;
  for (const auto& z : batch) {
    const double s = theta * z.x[0];
    const double p0 = 1.0 / (1.0 + std::exp(-s));
    ce += std::log1p(std::exp(s)) - z.y[0] * s;
    const double dx = theta * (p0 - z.y[0]);
    pen += dx * dx;
  }
  const auto r = training_objective(graph, batch, {th.data(), 1}, lambda);
  EXPECT_NEAR(r.value, ce / 3.0 + lambda * pen / 3.0, 1e-10);
  EXPECT_NEAR(r.mean_penalty, pen / 3.0, 1e-10);
}

TEST(TrainingObjective, RejectsBadInput) {
  const auto graph = scalar_classifier();
  const Vector th = Vector::Constant(1, 1.0);
  const std::vector<Sample> batch{labelled({0.5}, 2, 0)};
  EXPECT_THROW(training_objective(graph, batch, {th.data(), 1}, -1.0), std::invalid_argument);
  EXPECT_THROW(training_objective(graph, {}, {th.data(), 1}, 0.1), std::invalid_argument);
}
