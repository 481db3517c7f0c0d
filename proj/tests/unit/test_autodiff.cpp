#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wdro/autodiff.hpp"

using namespace wdro;
using wdro::fixtures::point;

namespace {

ad::ComputationGraph square_graph() {
  ad::GraphBuilder g;
  const auto x = g.features(1);
  return std::move(g).build(g.sum(g.mul(x, x)));
}

ad::ComputationGraph softplus_neg_graph() {
  ad::GraphBuilder g;
  const auto x = g.features(1);
  return std::move(g).build(g.sum(g.log(g.affine(g.exp(g.affine(x, -1.0, 0.0)), 1.0, 1.0))));
}

/// Classifier logits = W2 act(W1 x + b1) + b2 with softmax cross-entropy.
ad::ComputationGraph mlp_loss(Eigen::Index dim, Eigen::Index width, Eigen::Index classes, bool leaky) {
  ad::GraphBuilder g;
  const auto x = g.features(dim);
  const auto y = g.label(classes);
  const auto w1 = g.parameter("W1", width, dim);
  const auto b1 = g.parameter("b1", width, 1);
  const auto w2 = g.parameter("W2", classes, width);
  const auto b2 = g.parameter("b2", classes, 1);
  const auto pre = g.add(g.matvec(w1, x), b1);
  const auto act = leaky ? g.leaky_relu(pre, 0.1) : g.tanh(pre);
  const auto logits = g.add(g.matvec(w2, act), b2);
  return std::move(g).build(g.softmax_cross_entropy(logits, y));
}

Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = d(rng);
  return v;
}

Sample random_labelled(Eigen::Index dim, Eigen::Index classes, Rng& rng) {
  Sample z(random_vector(dim, rng, 0.7));
  z.y = Vector::Zero(classes);
  z.y[std::uniform_int_distribution<Eigen::Index>(0, classes - 1)(rng)] = 1.0;
  return z;
}

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST(Autodiff, SquareValueAndDerivative) {
  const auto graph = square_graph();
  EXPECT_DOUBLE_EQ(ad::evaluate(graph, point({3.0}), {}), 9.0);
  EXPECT_DOUBLE_EQ(ad::input_gradient(graph, point({3.0}), {})[0], 6.0);
}

TEST(Autodiff, SoftplusOfNegativeAtZeroIsLogTwo) {
  const auto graph = softplus_neg_graph();
  EXPECT_NEAR(ad::evaluate(graph, point({0.0}), {}), std::log(2.0), 1e-15);
}

TEST(Autodiff, SoftplusAtLargeMarginIsTiny) {
  const auto graph = softplus_neg_graph();
  const double v = ad::evaluate(graph, point({50.0}), {});
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-20);
  // log1p(e^-50) is about 1.93e-22; the graph may round it to zero.
  EXPECT_NEAR(v, std::log1p(std::exp(-50.0)), 1e-21);
}

TEST(Autodiff, ConstantFunctionHasZeroGradient) {
  ad::GraphBuilder g;
  const auto x = g.features(3);
  const auto graph = std::move(g).build(g.affine(g.sum(x), 0.0, 2.5));
  const Vector grad = ad::input_gradient(graph, point({0.3, -1.0, 2.0}), {});
  EXPECT_EQ(grad, Vector::Zero(3));
}

TEST(Autodiff, TanhNetworkMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto graph = mlp_loss(3, 5, 4, false);
    const Vector theta = random_vector(graph.parameter_count(), rng, 0.8);
    const Sample z = random_labelled(3, 4, rng);
    const auto fx = ad::finite_difference_check(graph, z, view(theta), ad::DifferentiationTarget::features, 1e-4);
    EXPECT_LE(fx.max_rel_error, 1e-5);
    const auto ft = ad::finite_difference_check(graph, z, view(theta), ad::DifferentiationTarget::parameters, 1e-4);
    EXPECT_LE(ft.max_rel_error, 1e-5);
  }
}

TEST(Autodiff, PrimitiveCompositionsMatchFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    ad::GraphBuilder g;
    const auto x = g.features(3);
    const auto w = g.parameter("w", 3, 3);
    const auto c = g.constant(random_vector(3, rng));
    const auto a = g.tanh(g.matvec(w, x));
    const auto b = g.leaky_relu(g.sub(x, c), 0.2);
    const auto e = g.exp(g.affine(g.mul(a, b), 0.5, 0.0));
    const auto s = g.softmax(g.add(e, x));
    const auto out = g.sum(g.log(g.affine(s, 1.0, 0.1)));
    const auto graph = std::move(g).build(out);
    const Vector theta = random_vector(graph.parameter_count(), rng);
    const Sample z(random_vector(3, rng));
    EXPECT_LE(ad::finite_difference_check(graph, z, view(theta), ad::DifferentiationTarget::features, 1e-4)
                  .max_rel_error,
              1e-5);
    EXPECT_LE(ad::finite_difference_check(graph, z, view(theta), ad::DifferentiationTarget::parameters, 1e-4)
                  .max_rel_error,
              1e-5);
  }
}

TEST(Autodiff, LeakyNetworkMatchesFiniteDifferences) {
  Rng rng(3);
  const auto graph = mlp_loss(4, 6, 3, true);
  const Vector theta = random_vector(graph.parameter_count(), rng, 0.8);
  const Sample z = random_labelled(4, 3, rng);
  EXPECT_LE(ad::finite_difference_check(graph, z, view(theta), ad::DifferentiationTarget::parameters, 1e-4)
                .max_rel_error,
            1e-5);
}

TEST(PenalizedLoss, ZeroWeightEqualsMeanLossGradient) {
  Rng rng(5);
  const auto graph = mlp_loss(3, 4, 3, false);
  const Vector theta = random_vector(graph.parameter_count(), rng);
  std::vector<Sample> batch;
  for (int k = 0; k < 6; ++k) batch.push_back(random_labelled(3, 3, rng));
  const auto r = ad::parameter_gradient_of_penalized_loss(graph, batch, view(theta), 0.0);
  Vector mean = Vector::Zero(theta.size());
  double loss = 0.0;
  for (const auto& z : batch) {
    mean += ad::parameter_gradient(graph, z, view(theta));
    loss += ad::evaluate(graph, z, view(theta));
  }
  mean /= static_cast<double>(batch.size());
  loss /= static_cast<double>(batch.size());
  EXPECT_EQ(r.mean_penalty, 0.0);
  EXPECT_NEAR(r.value, loss, 1e-14);
  EXPECT_LE((r.gradient - mean).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PenalizedLoss, ScalarLinearModelClosedForm) {
  ad::GraphBuilder g;
  const auto x = g.features(1);
  const auto t = g.parameter("theta", 1, 1);
  const auto graph = std::move(g).build(g.sum(g.matvec(t, x)));
  const double theta = 1.7;
  const double lambda = 0.3;
  const std::vector<Sample> batch{point({0.5}), point({-2.0})};
  const Vector th = Vector::Constant(1, theta);
  const auto r = ad::parameter_gradient_of_penalized_loss(graph, batch, view(th), lambda);
  const double mean_x = (0.5 - 2.0) / 2.0;
  EXPECT_NEAR(r.mean_penalty, theta * theta, 1e-14);
  EXPECT_NEAR(r.value, theta * mean_x + lambda * theta * theta, 1e-14);
  EXPECT_NEAR(r.gradient[0], mean_x + 2.0 * lambda * theta, 1e-14);
}

TEST(PenalizedLoss, SecondOrderGradientMatchesFiniteDifferences) {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const auto graph = mlp_loss(3, 5, 3, false);
    const Vector theta = random_vector(graph.parameter_count(), rng, 0.8);
    std::vector<Sample> batch;
    for (int k = 0; k < 4; ++k) batch.push_back(random_labelled(3, 3, rng));
    const auto rep = ad::finite_difference_check_penalized(graph, batch, view(theta), 0.004, 1e-4);
    EXPECT_LE(rep.max_rel_error, 1e-4);
    const auto strong = ad::finite_difference_check_penalized(graph, batch, view(theta), 1.0, 1e-4);
    EXPECT_LE(strong.max_rel_error, 1e-4);
  }
}

TEST(FiniteDifference, LinearFunctionIsExact) {
  const Vector w = (Vector(3) << 1.5, -2.0, 0.25).finished();
  const Vector at = (Vector(3) << 0.1, 0.2, -0.3).finished();
  for (double step : {1e-1, 1e-3, 1e-6}) {
    const auto rep = ad::finite_difference_check([&](const Vector& v) { return w.dot(v) + 3.0; }, w, at, step);
    EXPECT_LE(rep.max_abs_error, 1e-10);
  }
}

TEST(FiniteDifference, QuadraticIsAccurate) {
  const Vector at = (Vector(2) << 0.7, -1.3).finished();
  const Vector grad = (Vector(2) << 2.0 * 0.7 + 3.0 * -1.3, 3.0 * 0.7).finished();
  const auto rep = ad::finite_difference_check(
      [](const Vector& v) { return v[0] * v[0] + 3.0 * v[0] * v[1]; }, grad, at, 1e-4);
  EXPECT_LE(rep.max_rel_error, 1e-7);
}

TEST(FiniteDifference, DetectsWrongGradient) {
  const Vector at = Vector::Constant(1, 1.0);
  const auto rep = ad::finite_difference_check([](const Vector& v) { return v[0] * v[0]; },
                                               Vector::Constant(1, 3.0), at, 1e-4);
  EXPECT_GT(rep.max_rel_error, 0.1);
}

TEST(Autodiff, ShapeMismatchIsRejected) {
  ad::GraphBuilder g;
  const auto x = g.features(2);
  const auto w = g.parameter("w", 3, 3);
  EXPECT_THROW(g.matvec(w, x), ad::ShapeError);
}
