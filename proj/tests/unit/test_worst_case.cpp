#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wdro/worst_case.hpp"

using namespace wdro;
using namespace wdro::oracle;
using wdro::fixtures::point;

namespace {

const geometry::Order kP1 = geometry::Order::rational(1);

measures::SampleSpaceSpec two_point_grid() { return measures::SampleSpaceSpec::box(1, 0.0, 1.0, 2); }

}  // namespace

TEST(InnerSup, TwoPointEvaluation) {
  auto h = fixtures::identity_loss();
  const auto grid = two_point_grid().grid();
  const auto r = inner_sup(*h, point({0.0}), 0.5, grid, kP1);
  EXPECT_DOUBLE_EQ(r.value, 0.5);
  EXPECT_EQ(r.witness, 1u);
}

TEST(InnerSup, ZeroLambdaIsGlobalMax) {
  Rng rng(3);
  auto net = fixtures::tanh_network(1, 6, rng);
  const auto grid = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 101).grid();
  double best = -1e300;
  for (const auto& z : grid) best = std::max(best, net->value(z));
  EXPECT_DOUBLE_EQ(inner_sup(*net, point({0.2}), 0.0, grid, geometry::Order::rational(2)).value, best);
}

TEST(InnerSup, LargeLambdaPicksCenter) {
  Rng rng(4);
  auto net = fixtures::tanh_network(1, 6, rng);
  const auto grid = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 101).grid();
  const Sample center = grid[37];
  const auto r = inner_sup(*net, center, 1e9, grid, geometry::Order::rational(2));
  EXPECT_EQ(r.witness, 37u);
  EXPECT_DOUBLE_EQ(r.value, net->value(center));
}

TEST(DualObjective, SinglePointArithmetic) {
  auto h = fixtures::identity_loss();
  const measures::EmpiricalMeasure m({point({0.0})});
  const WassersteinBall ball{0.5, kP1, {}};
  EXPECT_DOUBLE_EQ(dual_objective(1.0, *h, m, ball, two_point_grid()), 0.5);
}

TEST(DualObjective, ZeroRadiusTendsToPlainRisk) {
  Rng rng(5);
  auto net = fixtures::tanh_network(1, 5, rng);
  const auto space = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 41);
  const auto grid = space.grid();
  const measures::EmpiricalMeasure m({grid[3], grid[20], grid[33]});
  const WassersteinBall ball{0.0, geometry::Order::rational(2), {}};
  EXPECT_NEAR(dual_objective(1e9, *net, m, ball, space), objectives::risk(m, *net), 1e-12);
}

TEST(DualObjective, ConvexInLambda) {
  Rng rng(6);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = fixtures::tanh_network(1, 5, rng);
    const auto space = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 31);
    const auto grid = space.grid();
    const measures::EmpiricalMeasure m({grid[2], grid[15], grid[27]});
    const WassersteinBall ball{0.2, geometry::Order::rational(2), {}};
    const double a = u(rng), b = u(rng);
    const double mid = dual_objective(0.5 * (a + b), *net, m, ball, space);
    const double avg = 0.5 * (dual_objective(a, *net, m, ball, space) + dual_objective(b, *net, m, ball, space));
    EXPECT_LE(mid, avg + 1e-12);
  }
}

TEST(WorstCase, ZeroRadiusIsPlainRisk) {
  Rng rng(7);
  auto net = fixtures::tanh_network(1, 5, rng);
  const auto space = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 21);
  const auto grid = space.grid();
  const measures::EmpiricalMeasure m({grid[1], grid[10], grid[19]});
  const auto r = worst_case_risk(*net, m, {0.0, geometry::Order::rational(2), {}}, space);
  EXPECT_DOUBLE_EQ(r.value, objectives::risk(m, *net));
}

TEST(WorstCase, TwoPointInstance) {
  auto h = fixtures::identity_loss();
  const measures::EmpiricalMeasure m({point({0.0})});
  const WassersteinBall ball{0.5, kP1, {}};
  const auto r = worst_case_risk(*h, m, ball, two_point_grid());
  EXPECT_NEAR(r.value, 0.5, 1e-9);
  EXPECT_NEAR(r.lambda_star, 1.0, 1e-6);
  EXPECT_NEAR(primal_worst_case_lp(*h, m, ball, two_point_grid()), 0.5, 1e-12);
}

TEST(WorstCase, ZeroRadiusPrimalIsPlainRisk) {
  Rng rng(8);
  auto net = fixtures::tanh_network(1, 5, rng);
  const auto space = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 16);
  const auto grid = space.grid();
  const measures::EmpiricalMeasure m({grid[0], grid[7], grid[15]});
  EXPECT_NEAR(primal_worst_case_lp(*net, m, {0.0, geometry::Order::rational(2), {}}, space),
              objectives::risk(m, *net), 1e-12);
}

TEST(WorstCase, MonotoneInRadius) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto net = fixtures::tanh_network(1, 5, rng);
    const auto space = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 51);
    const auto grid = space.grid();
    const measures::EmpiricalMeasure m({grid[5], grid[25], grid[44]});
    const auto p = geometry::Order::rational(2);
    EXPECT_GE(worst_case_risk(*net, m, {0.2, p, {}}, space).value + 1e-12,
              worst_case_risk(*net, m, {0.1, p, {}}, space).value);
  }
}

TEST(WorstCase, DualMatchesPrimalOnRandomInstances) {
  Rng rng(10);
  std::uniform_int_distribution<std::size_t> pick(0, 31);
  for (int trial = 0; trial < 12; ++trial) {
    auto net = fixtures::tanh_network(1, 4, rng);
    const auto space = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 32);
    const auto grid = space.grid();
    std::vector<Sample> centers;
    for (int k = 0; k < 1 + trial % 8; ++k) centers.push_back(grid[pick(rng)]);
    const measures::EmpiricalMeasure m(centers);
    for (std::int64_t p : {1, 2, 4}) {
      for (double a : {0.0, 0.1, 0.5}) {
        const WassersteinBall ball{a, geometry::Order::rational(p), {}};
        EXPECT_NEAR(worst_case_risk(*net, m, ball, space).value, primal_worst_case_lp(*net, m, ball, space), 1e-6);
      }
    }
  }
}

TEST(WorstCase, CenterOffGridIsRejected) {
  auto h = fixtures::identity_loss();
  const measures::EmpiricalMeasure m({point({0.3})});
  EXPECT_THROW(worst_case_risk(*h, m, {0.1, kP1, {}}, two_point_grid()), std::invalid_argument);
}

TEST(WorstCase, PrimalSizeCap) {
  auto h = fixtures::identity_loss();
  const auto space = measures::SampleSpaceSpec::box(1, 0.0, 1.0, 5000);
  const measures::EmpiricalMeasure m({point({0.0})});
  EXPECT_THROW(primal_worst_case_lp(*h, m, {0.1, kP1, {}}, space), std::length_error);
}

TEST(LogLogFit, RecoversSlope) {
  const std::vector<double> a{0.2, 0.1, 0.05, 0.025};
  std::vector<double> e;
  for (double x : a) e.push_back(3.0 * x * x);
  const auto fit = fit_log_log(a, e);
  EXPECT_TRUE(fit.defined);
  EXPECT_NEAR(fit.slope, 2.0, 1e-12);
  EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
}

TEST(RateStudy, ConstantLossHasUndefinedSlope) {
  auto h = fixtures::constant_loss(1, 0.7);
  const auto space = measures::SampleSpaceSpec::box(1, -1.0, 1.0, 201);
  const auto grid = space.grid();
  const measures::EmpiricalMeasure m({grid[50], grid[120]});
  const auto r = approximation_rate_study(*h, m, geometry::Order::rational(4), {0.2, 0.1, 0.05}, space);
  for (double e : r.errors) EXPECT_EQ(e, 0.0);
  for (double v : r.exact) EXPECT_DOUBLE_EQ(v, 0.7);
  EXPECT_FALSE(r.fit.defined);
  EXPECT_FALSE(r.notes.empty());
}

TEST(RateStudy, QuadraticLossRates) {
  auto h = fixtures::quadratic_loss(1, 0.5, 0.0);
  const auto space = measures::SampleSpaceSpec::box(1, -1.5, 1.5, 3001);
  const auto grid = space.grid();
  const measures::EmpiricalMeasure m({grid[1200], grid[1700], grid[2100]});
  const std::vector<double> alphas{0.2, 0.1, 0.05, 0.025};
  const auto r = approximation_rate_study(*h, m, geometry::Order::rational(4), alphas, space);
  EXPECT_GE(r.fit.slope, 1.8);
  EXPECT_GE(r.plain_fit.slope, 0.9);
}

TEST(RateStudy, RejectsNonDecreasingGrid) {
  auto h = fixtures::identity_loss();
  const measures::EmpiricalMeasure m({point({0.0})});
  EXPECT_THROW(approximation_rate_study(*h, m, geometry::Order::rational(2), {0.1, 0.2}, two_point_grid()),
               std::invalid_argument);
}
