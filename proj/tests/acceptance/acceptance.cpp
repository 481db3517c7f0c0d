// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "wdro/config.hpp"
#include "wdro/experiments.hpp"
#include "wdro/model.hpp"
#include "wdro/report_io.hpp"
#include "wdro/worst_case.hpp"

namespace fs = std::filesystem;
using namespace wdro;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Vector normal_vector(Eigen::Index n, Rng& rng, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = d(rng);
  return v;
}

/// Scalar tanh network on R^dim with random parameters.
struct Net {
  std::unique_ptr<ad::ComputationGraph> graph;
  std::unique_ptr<objectives::DifferentiableLoss> loss;
};

Net random_net(Eigen::Index dim, Eigen::Index width, Rng& rng) {
  ad::GraphBuilder g;
  const auto x = g.features(dim);
  const auto w1 = g.parameter("W1", width, dim);
  const auto b1 = g.parameter("b1", width, 1);
  const auto w2 = g.parameter("W2", 1, width);
  const auto out = g.sum(g.matvec(w2, g.tanh(g.add(g.matvec(w1, x), b1))));
  Net n;
  n.graph = std::make_unique<ad::ComputationGraph>(std::move(g).build(out));
  n.loss = std::make_unique<objectives::DifferentiableLoss>(*n.graph,
                                                            normal_vector(n.graph->parameter_count(), rng, 1.5));
  return n;
}

measures::EmpiricalMeasure random_measure(Rng& rng, std::size_t max_support, Eigen::Index dim) {
  std::uniform_int_distribution<std::size_t> size(1, max_support);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.1, 1.0);
  const std::size_t n = size(rng);
  std::vector<Sample> pts;
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(dim);
    for (Eigen::Index k = 0; k < dim; ++k) x[k] = u(rng);
    pts.emplace_back(std::move(x));
    weights[i] = w(rng);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& v : weights) v /= total;
  weights.back() = 1.0 - std::accumulate(weights.begin(), weights.end() - 1, 0.0);
  return measures::EmpiricalMeasure(std::move(pts), std::move(weights));
}

// 1. Dual and primal worst-case values agree.
Outcome dual_primal() {
  Rng rng(101);
  double worst = 0.0;
  std::size_t instances = 0;
  for (int base = 0; base < 12; ++base) {
    const bool two_d = base % 3 == 2;
    const auto space = two_d ? measures::SampleSpaceSpec::box(2, -1.0, 1.0, 5)
                             : measures::SampleSpaceSpec::box(1, -1.0, 1.0, 8 + static_cast<std::size_t>(base) * 2);
    const auto grid = space.grid();
    const Net net = random_net(two_d ? 2 : 1, 4, rng);
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    std::vector<Sample> centers;
    for (int k = 0; k < 1 + base % 8; ++k) centers.push_back(grid[pick(rng)]);
    const measures::EmpiricalMeasure m(centers);
    for (std::int64_t p : {1, 2, 4}) {
      for (double alpha : {0.0, 0.1, 0.5}) {
        const oracle::WassersteinBall ball{alpha, geometry::Order::rational(p), space.norm};
        const double dual = oracle::worst_case_risk(*net.loss, m, ball, space).value;
        const double primal = oracle::primal_worst_case_lp(*net.loss, m, ball, space);
        worst = std::max(worst, std::abs(dual - primal));
        ++instances;
      }
    }
  }
  return {worst <= 1e-6, std::to_string(instances) + " instances, max |dual - primal| = " + fmt("%.3g", worst)};
}

// 2-4 share one study run.
struct RateOutcomes {
  Outcome clean, perturbed, sandwich;
};

RateOutcomes rate_study(const fs::path& out) {
  const experiments::ExperimentConfig cfg;
  const auto r = experiments::run_rate_study(cfg);
  report::write_rate_study(out, r);
  RateOutcomes o;
  const double s = r.clean.fit.slope, plain = r.clean.plain_fit.slope;
  o.clean.pass = r.clean.fit.defined && s >= 1.8 && plain >= 0.9 && plain <= 1.3 && cfg.rate_study.grid_points >= 201;
  o.clean.detail = "surrogate slope " + fmt("%.4f", s) + " (>= 1.8), plain slope " + fmt("%.4f", plain) +
                   " (in [0.9, 1.3]), grid " + std::to_string(cfg.rate_study.grid_points);
  const double sp = r.perturbed.fit.slope;
  bool beta_ok = true;
  for (std::size_t k = 0; k < r.perturbed.betas.size(); ++k) {
    const double a = r.perturbed.alpha_grid[k];
    beta_ok = beta_ok && r.perturbed.betas[k] <= a * a * (1.0 + 1e-12);
  }
  o.perturbed.pass = r.perturbed.fit.defined && std::abs(sp - s) <= 0.2 && beta_ok;
  o.perturbed.detail = "perturbed slope " + fmt("%.4f", sp) + ", |difference| " + fmt("%.4f", std::abs(sp - s)) +
                       " (<= 0.2), beta <= alpha^2: " + (beta_ok ? "yes" : "no");

  // Sandwich on the default study and on further seeds.
  std::size_t checks = 0, held = 0;
  double tightest = 0.0;
  auto tally = [&](const experiments::RateStudyResult& res) {
    for (const auto& sw : res.sandwich) {
      ++checks;
      held += sw.holds ? 1 : 0;
      tightest = std::max(tightest, sw.gap / sw.bound);
    }
  };
  tally(r);
  for (std::uint64_t seed = 5; seed < 10; ++seed) {
    auto c = cfg;
    c.rate_study.seed = seed;
    tally(experiments::run_rate_study(c));
  }
  o.sandwich.pass = checks > 0 && held == checks;
  o.sandwich.detail = std::to_string(held) + "/" + std::to_string(checks) +
                      " instances hold, largest gap/bound " + fmt("%.4f", tightest);
  return o;
}

// 5. First and second order derivatives against central differences.
Outcome differentiation() {
  Rng rng(202);
  double first = 0.0, second = 0.0, first_tanh = 0.0, first_abs = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto act = k % 2 ? models::Activation::leaky_relu : models::Activation::tanh;
    const models::Model model(models::ModelSpec::mlp(3 + k % 3, {4 + k % 4, 3}, 3, act));
    const Vector theta = models::init_parameters(model, rng) + normal_vector(model.parameter_count(), rng, 0.1);
    auto sample = [&] {
      Sample z(normal_vector(model.spec().input_dim(), rng, 0.5));
      z.y = Vector::Zero(3);
      z.y[std::uniform_int_distribution<int>(0, 2)(rng)] = 1.0;
      return z;
    };
    const Sample z = sample();
    for (auto target : {ad::DifferentiationTarget::features, ad::DifferentiationTarget::parameters}) {
      const auto r = ad::finite_difference_check(model.loss_graph(), z, view(theta), target, 1e-4);
      first = std::max(first, r.max_rel_error);
      first_abs = std::max(first_abs, r.max_abs_error);
      if (act == models::Activation::tanh) first_tanh = std::max(first_tanh, r.max_rel_error);
    }
    std::vector<Sample> batch{z, sample(), sample()};
    second = std::max(second, ad::finite_difference_check_penalized(model.loss_graph(), batch, view(theta),
                                                                    k % 2 ? 0.004 : 1.0, 1e-4)
                                  .max_rel_error);
  }
  return {first <= 1e-5 && second <= 1e-4,
          "first-order max rel error " + fmt("%.3g", first) + " (tanh models " + fmt("%.3g", first_tanh) +
              ", max abs error " + fmt("%.3g", first_abs) + "), penalty gradient " + fmt("%.3g", second)};
}

// 6. Metric axioms and order monotonicity of the Wasserstein distance.
Outcome metric_axioms() {
  Rng rng(303);
  const auto p1 = geometry::Order::rational(1), p2 = geometry::Order::rational(2), p4 = geometry::Order::rational(4);
  double identity = 0.0, symmetry = 0.0, triangle = 0.0, order = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto a = random_measure(rng, 16, 2), b = random_measure(rng, 16, 2), c = random_measure(rng, 16, 2);
    identity = std::max(identity, measures::wasserstein_distance(a, a, p2, {}));
    const double ab = measures::wasserstein_distance(a, b, p2, {});
    symmetry = std::max(symmetry, std::abs(ab - measures::wasserstein_distance(b, a, p2, {})));
    triangle = std::max(triangle, measures::wasserstein_distance(a, c, p2, {}) - ab -
                                      measures::wasserstein_distance(b, c, p2, {}));
    const double w1 = measures::wasserstein_distance(a, b, p1, {});
    const double w4 = measures::wasserstein_distance(a, b, p4, {});
    order = std::max({order, w1 - ab, ab - w4});
  }
  const bool pass = identity <= 1e-9 && symmetry <= 1e-9 && triangle <= 1e-9 && order <= 1e-9;
  return {pass, "identity " + fmt("%.2g", identity) + ", symmetry " + fmt("%.2g", symmetry) + ", triangle excess " +
                    fmt("%.2g", std::max(0.0, triangle)) + ", W1<=W2<=W4 excess " + fmt("%.2g", std::max(0.0, order))};
}

double median_reduction(const experiments::ComparisonReport& r, experiments::Method m, std::size_t level) {
  std::vector<double> v;
  for (const auto& t : r.trials)
    if (t.method == m && t.completed) v.push_back(t.reduction[level]);
  return v.empty() ? std::nan("") : models::median(v);
}

struct ComparisonOutcomes {
  Outcome robustness, gradients;
};

ComparisonOutcomes comparison(const fs::path& out) {
  experiments::ExperimentConfig cfg;
  cfg.experiment.trials = 5;
  const auto r = experiments::run_gradient_analysis(cfg);
  report::write_comparison(out, r);
  ComparisonOutcomes o;
  const auto it = std::find(r.levels.begin(), r.levels.end(), 0.02);
  if (it == r.levels.end()) {
    o.robustness = {false, "2% level missing from the default config"};
    return o;
  }
  const std::size_t l = static_cast<std::size_t>(it - r.levels.begin());
  using experiments::Method;
  const double erm = median_reduction(r, Method::erm, l), wdro = median_reduction(r, Method::wdro, l);
  const double mix = median_reduction(r, Method::mixup, l), wmix = median_reduction(r, Method::wdro_mix, l);
  o.robustness.pass = r.all_completed() && wdro < erm && wmix < mix;
  o.robustness.detail = "median reduction at 2%: wdro " + fmt("%.4f", wdro) + " < erm " + fmt("%.4f", erm) +
                        ", wdro+mix " + fmt("%.4f", wmix) + " < mixup " + fmt("%.4f", mix) +
                        (r.all_completed() ? "" : " (some trials failed)");

  // Final-checkpoint quartiles, median over trials of each statistic.
  std::size_t final_step = 0;
  for (const auto& g : r.gradients) final_step = std::max(final_step, g.step);
  auto stat = [&](Method m, double models::Quartiles::*field) {
    std::vector<double> v;
    for (const auto& g : r.gradients)
      if (g.method == m && g.step == final_step) v.push_back(g.quartiles.*field);
    return models::median(v);
  };
  const double e1 = stat(Method::erm, &models::Quartiles::q1), w1 = stat(Method::wdro, &models::Quartiles::q1);
  const double e2 = stat(Method::erm, &models::Quartiles::median), w2 = stat(Method::wdro, &models::Quartiles::median);
  const double e3 = stat(Method::erm, &models::Quartiles::q3), w3 = stat(Method::wdro, &models::Quartiles::q3);
  bool split = true;
  std::string cats;
  for (Method m : cfg.experiment.methods) {
    double c1 = std::nan(""), c2 = std::nan("");
    for (const auto& c : r.category_summaries) {
      if (c.method != m) continue;
      (c.category == experiments::Category::c1 ? c1 : c2) = c.median;
    }
    split = split && c1 < c2;
    cats += std::string(", ") + experiments::method_name(m) + " C1 " + fmt("%.3g", c1) + " / C2 " + fmt("%.3g", c2);
  }
  o.gradients.pass = w1 < e1 && w2 < e2 && w3 < e3 && split;
  o.gradients.detail = "wdro vs erm Q1 " + fmt("%.3g", w1) + "/" + fmt("%.3g", e1) + ", median " + fmt("%.3g", w2) +
                       "/" + fmt("%.3g", e2) + ", Q3 " + fmt("%.3g", w3) + "/" + fmt("%.3g", e3) + cats;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Lists differing files between two run directories.
std::vector<std::string> compare_dirs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> diffs;
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path other = b / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) diffs.push_back(entry.path().filename().string());
  }
  if (files == 0) diffs.push_back("<no files>");
  return diffs;
}

void report_line(int id, const char* name, const Outcome& o, double seconds) {
  std::printf("criterion %d [%s]: %s - %s (%.1f s)\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds);
  std::fflush(stdout);
}

template <class F>
auto timed(F&& f, double& seconds) {
  const auto start = std::chrono::steady_clock::now();
  auto result = f();
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = fs::temp_directory_path() / "wdro_acceptance";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--out") == 0) out = argv[i + 1];
  }
  fs::remove_all(out);
  fs::create_directories(out);
  bool all = true;
  auto record = [&](int id, const char* name, const Outcome& o, double s) {
    all = all && o.pass;
    report_line(id, name, o, s);
  };

  try {
    double t = 0.0;
    auto o1 = timed(dual_primal, t);
    if (t >= 30.0) o1 = {false, o1.detail + "; too slow"};
    record(1, "dual-primal oracle agreement", o1, t);

    double t_rate = 0.0;
    auto rates = timed([&] { return rate_study(out / "rate_a"); }, t_rate);
    if (t_rate >= 120.0) {
      rates.clean.pass = rates.perturbed.pass = false;
      rates.clean.detail += "; too slow";
    }
    record(2, "surrogate approximation rate", rates.clean, t_rate);
    record(3, "rate under local perturbation", rates.perturbed, t_rate);
    record(4, "perturbed risk sandwich", rates.sandwich, t_rate);

    auto o5 = timed(differentiation, t);
    if (t >= 10.0) o5 = {false, o5.detail + "; too slow"};
    record(5, "differentiation against finite differences", o5, t);

    auto o6 = timed(metric_axioms, t);
    if (t >= 30.0) o6 = {false, o6.detail + "; too slow"};
    record(6, "Wasserstein metric axioms", o6, t);

    double t_cmp = 0.0;
    auto cmp = timed([&] { return comparison(out / "compare_a"); }, t_cmp);
    if (t_cmp >= 600.0) cmp.robustness = {false, cmp.robustness.detail + "; too slow"};
    record(7, "robustness ordering", cmp.robustness, t_cmp);
    record(8, "gradient profile ordering", cmp.gradients, t_cmp);

    const auto start = std::chrono::steady_clock::now();
    rate_study(out / "rate_b");
    comparison(out / "compare_b");
    auto diffs = compare_dirs(out / "rate_a", out / "rate_b");
    for (const auto& d : compare_dirs(out / "compare_a", out / "compare_b")) diffs.push_back(d);
    Outcome o9{diffs.empty(), diffs.empty() ? "rate-study and comparison reports byte-identical on rerun"
                                            : "differing files:"};
    for (const auto& d : diffs) o9.detail += " " + d;
    record(9, "determinism", o9, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("acceptance: %s\n", all ? "ALL PASS" : "FAILURES");
  return all ? 0 : 1;
}
