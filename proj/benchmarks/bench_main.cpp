#include <numeric>
#include <random>

#include <benchmark/benchmark.h>

#include "wdro/experiments.hpp"
#include "wdro/model.hpp"
#include "wdro/objectives.hpp"
#include "wdro/transport.hpp"
#include "wdro/worst_case.hpp"

using namespace wdro;

namespace {

std::vector<Sample> random_batch(std::size_t n, Eigen::Index dim, int classes, Rng& rng) {
  std::normal_distribution<double> d(0.0, 0.5);
  std::uniform_int_distribution<int> label(0, classes - 1);
  std::vector<Sample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(dim);
    for (Eigen::Index k = 0; k < dim; ++k) x[k] = d(rng);
    Sample z(std::move(x));
    z.y = Vector::Zero(classes);
    z.y[label(rng)] = 1.0;
    batch.push_back(std::move(z));
  }
  return batch;
}

std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(n);
  for (double& v : w) v = u(rng);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

static void BM_PenalizedObjective(benchmark::State& state) {
  Rng rng(1);
  const models::Model model(models::ModelSpec::mlp(64, {64, 64}, 10, models::Activation::tanh));
  const Vector theta = models::init_parameters(model, rng);
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 64, 10, rng);
  const double lambda = state.range(1) ? 1.0 : 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        objectives::training_objective(model.loss_graph(), batch, {theta.data(), static_cast<std::size_t>(theta.size())}, lambda));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PenalizedObjective)->Args({64, 0})->Args({64, 1})->Unit(benchmark::kMillisecond);

static void BM_TransportSolve(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_simplex(n, rng), b = random_simplex(n, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix cost(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(transport::solve(a, b, cost));
}
BENCHMARK(BM_TransportSolve)->Arg(8)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_WorstCaseRisk(benchmark::State& state) {
  experiments::RateStudySection cfg;
  cfg.grid_points = static_cast<std::size_t>(state.range(0));
  const auto study = experiments::rate_study_loss(cfg);
  const auto space = measures::SampleSpaceSpec::box(1, cfg.lower, cfg.upper, cfg.grid_points);
  const auto grid = space.grid();
  std::vector<Sample> centers;
  for (std::size_t k = 1; k <= 8; ++k) centers.push_back(grid[k * (grid.size() - 1) / 9]);
  const measures::EmpiricalMeasure m(std::move(centers));
  const oracle::WassersteinBall ball{0.05, geometry::Order::rational(4), {}};
  for (auto _ : state) benchmark::DoNotOptimize(oracle::worst_case_risk(*study.loss, m, ball, space));
}
BENCHMARK(BM_WorstCaseRisk)->Arg(3001)->Arg(30001)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
