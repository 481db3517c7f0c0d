#include "wdro/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "wdro/trainer.hpp"

namespace wdro::experiments {

namespace {
constexpr std::uint64_t kTrainDataStream = 10;
constexpr std::uint64_t kTestDataStream = 11;
constexpr std::uint64_t kSplitStream = 12;
constexpr std::uint64_t kContaminationStream = 30;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

Stats describe(const std::vector<double>& values) {
  Stats s;
  s.n = values.size();
  if (s.n == 0) {
    s.mean = s.std = s.median = kNaN;
    return s;
  }
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  s.median = models::median(values);
  return s;
}

WelchTest welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("Welch test: need >= 2 values per group");
  const Stats sa = describe(a);
  const Stats sb = describe(b);
  const double va = sa.std * sa.std / static_cast<double>(sa.n);
  const double vb = sb.std * sb.std / static_cast<double>(sb.n);
  WelchTest w;
  if (va + vb == 0.0) {
    w.t = sa.mean == sb.mean ? 0.0 : kNaN;
    w.df = kNaN;
    w.p_value = sa.mean == sb.mean ? 1.0 : kNaN;
    return w;
  }
  w.t = (sa.mean - sb.mean) / std::sqrt(va + vb);
  w.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(sa.n - 1) + vb * vb / static_cast<double>(sb.n - 1));
  const boost::math::students_t dist(w.df);
  w.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(w.t)));
  return w;
}

const char* category_name(Category c) { return c == Category::c1 ? "C1" : "C2"; }

bool ComparisonReport::all_completed() const {
  return std::all_of(trials.begin(), trials.end(), [](const TrialRecord& r) { return r.completed; });
}

bool SweepReport::all_completed() const {
  return std::all_of(records.begin(), records.end(), [](const SweepRecord& r) { return r.completed; });
}

TrialData trial_data(const ExperimentConfig& cfg, std::size_t trial) {
  const auto& d = cfg.data;
  const std::uint64_t seed = cfg.experiment.data_seed;
  if (d.source == "synthetic") {
    data::SyntheticSpec spec;
    spec.generator = d.generator;
    spec.dimension = d.dimension;
    spec.num_classes = d.classes;
    spec.noise = d.noise;
    spec.n = d.n_train;
    spec.seed = derive_seed(seed, kTrainDataStream, trial);
    TrialData out{data::generate(spec), {}};
    spec.n = d.n_test;
    spec.seed = derive_seed(seed, kTestDataStream, trial);
    out.test = data::generate(spec);
    return out;
  }
  const auto format = data::parse_format(d.format);
  data::Dataset full = data::load_dataset(d.path, format);
  if (!d.test_path.empty()) {
    data::Dataset test = data::load_dataset(d.test_path, format);
    const int classes = std::max(full.num_classes, test.num_classes);
    full.num_classes = classes;
    test.num_classes = classes;
    return {std::move(full), std::move(test)};
  }
  Rng rng(derive_seed(seed, kSplitStream, trial));
  auto [train, test] = data::train_test_split(full, d.test_fraction, rng);
  return {std::move(train), std::move(test)};
}

data::Dataset contaminate(const ExperimentConfig& cfg, const data::Dataset& test, std::size_t trial,
                          std::size_t level_index, double probability) {
  Rng rng(derive_seed(cfg.experiment.contamination_seed, kContaminationStream + level_index, trial));
  return data::salt_pepper(test, probability, rng);
}

models::ModelSpec model_spec(const ExperimentConfig& cfg, const data::Dataset& train) {
  models::ModelSpec spec = models::ModelSpec::mlp(train.dimension(), cfg.model.hidden, train.num_classes,
                                                  cfg.model.activation);
  spec.leaky_slope = cfg.model.leaky_slope;
  spec.validate();
  return spec;
}

namespace {

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

struct Evaluation {
  double clean = 0.0;
  std::vector<double> contaminated;
  std::vector<double> reduction;
};

Evaluation evaluate(const models::Model& model, const Vector& theta, const data::Dataset& test,
                    const std::vector<data::Dataset>& contaminated) {
  Evaluation e;
  e.clean = models::evaluate_accuracy(model, view(theta), test);
  for (const auto& c : contaminated) {
    const double acc = models::evaluate_accuracy(model, view(theta), c);
    e.contaminated.push_back(acc);
    e.reduction.push_back(e.clean - acc);
  }
  return e;
}

std::vector<Stats> level_stats(const std::vector<std::vector<double>>& per_level) {
  std::vector<Stats> out;
  for (const auto& v : per_level) out.push_back(describe(v));
  return out;
}

void build_histogram(ComparisonReport& report, const std::map<std::pair<int, int>, std::vector<double>>& pooled,
                     std::size_t bins) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& [key, values] : pooled) {
    for (double v : values) {
      if (v > 0.0) lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo) || hi <= lo) {
    lo = 1e-12;
    hi = std::max(hi, 1.0);
  }
  // Log-spaced edges; zeros fall into the first bin.
  const double llo = std::log10(lo);
  const double lhi = std::log10(hi);
  std::vector<double> edges(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    edges[k] = std::pow(10.0, llo + (lhi - llo) * static_cast<double>(k) / static_cast<double>(bins));
  }
  edges.front() = 0.0;
  edges.back() = hi;
  for (const auto& [key, values] : pooled) {
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
      auto it = std::upper_bound(edges.begin(), edges.end(), v);
      std::size_t idx = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
      counts[std::min(idx, bins - 1)]++;
    }
    for (std::size_t k = 0; k < bins; ++k) {
      report.histogram.push_back({static_cast<Method>(key.first), static_cast<Category>(key.second), edges[k],
                                  edges[k + 1], counts[k]});
    }
  }
}

}  // namespace

ComparisonReport run_comparison(const ExperimentConfig& cfg, bool with_profiles,
                                const std::filesystem::path& checkpoint_dir) {
  cfg.validate();
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
  ComparisonReport report;
  report.levels = cfg.experiment.contamination;
  const auto& methods = cfg.experiment.methods;

  // Index of the category level among the contamination levels, or a
  // dedicated contaminated set when it is not one of them.
  std::map<std::pair<int, int>, std::vector<double>> pooled;
  for (std::size_t trial = 0; trial < cfg.experiment.trials; ++trial) {
    const TrialData td = trial_data(cfg, trial);
    const models::Model model(model_spec(cfg, td.train));
    std::vector<data::Dataset> contaminated;
    for (std::size_t l = 0; l < report.levels.size(); ++l) {
      contaminated.push_back(contaminate(cfg, td.test, trial, l, report.levels[l]));
    }
    data::Dataset category_set;
    if (with_profiles) {
      const auto it = std::find(report.levels.begin(), report.levels.end(), cfg.experiment.category_level);
      category_set = it != report.levels.end()
                         ? contaminated[static_cast<std::size_t>(it - report.levels.begin())]
                         : contaminate(cfg, td.test, trial, report.levels.size(), cfg.experiment.category_level);
    }

    for (Method method : methods) {
      TrialRecord rec;
      rec.method = method;
      rec.trial = trial;
      models::TrainConfig tc = train_config(cfg, method, trial);
      if (!with_profiles) tc.checkpoints.clear();
      try {
        const models::TrainResult res = models::train(td.train, model, tc);
        const Evaluation e = evaluate(model, res.ema, td.test, contaminated);
        rec.clean_accuracy = e.clean;
        rec.contaminated = e.contaminated;
        rec.reduction = e.reduction;
        if (!checkpoint_dir.empty()) {
          const std::string name = std::string(method_name(method)) + "-trial" + std::to_string(trial) + ".ckpt";
          models::write_checkpoint({model.spec(), {res.raw, res.ema}}, checkpoint_dir / name);
        }
        if (with_profiles) {
          for (const auto& [step, theta] : res.history.ema_checkpoints) {
            if (step == tc.steps()) continue;  // profiled below from the final EMA
            const auto profile = models::gradient_norm_profile(model, view(theta), td.test);
            report.gradients.push_back({method, trial, step, profile.summary});
          }
          const auto profile = models::gradient_norm_profile(model, view(res.ema), td.test);
          report.gradients.push_back({method, trial, tc.steps(), profile.summary});
          const auto clean_ok = models::correct_predictions(model, view(res.ema), td.test);
          const auto dirty_ok = models::correct_predictions(model, view(res.ema), category_set);
          std::vector<double> c1;
          std::vector<double> c2;
          for (std::size_t i = 0; i < td.test.size(); ++i) {
            if (!clean_ok[i]) continue;
            (dirty_ok[i] ? c1 : c2).push_back(profile.norms[i]);
          }
          for (auto [cat, values] : {std::pair{Category::c1, &c1}, std::pair{Category::c2, &c2}}) {
            report.categories.push_back(
                {method, trial, cat, values->size(), values->empty() ? kNaN : models::median(*values)});
            auto& sink = pooled[{static_cast<int>(method), static_cast<int>(cat)}];
            sink.insert(sink.end(), values->begin(), values->end());
          }
        }
      } catch (const models::TrainingDiverged& e) {
        rec.completed = false;
        rec.failure = e.what();
        rec.clean_accuracy = kNaN;
        rec.contaminated.assign(report.levels.size(), kNaN);
        rec.reduction.assign(report.levels.size(), kNaN);
      }
      report.trials.push_back(std::move(rec));
    }
  }

  for (Method method : methods) {
    std::vector<double> clean;
    std::vector<std::vector<double>> dirty(report.levels.size());
    std::vector<std::vector<double>> red(report.levels.size());
    for (const TrialRecord& r : report.trials) {
      if (r.method != method || !r.completed) continue;
      clean.push_back(r.clean_accuracy);
      for (std::size_t l = 0; l < report.levels.size(); ++l) {
        dirty[l].push_back(r.contaminated[l]);
        red[l].push_back(r.reduction[l]);
      }
    }
    const Stats clean_stats = describe(clean);
    const auto dirty_stats = level_stats(dirty);
    const auto red_stats = level_stats(red);
    for (std::size_t l = 0; l < report.levels.size(); ++l) {
      report.summaries.push_back({method, report.levels[l], clean_stats, dirty_stats[l], red_stats[l]});
    }
  }

  for (std::size_t l = 0; l < report.levels.size(); ++l) {
    for (std::size_t i = 0; i < methods.size(); ++i) {
      for (std::size_t j = i + 1; j < methods.size(); ++j) {
        std::vector<double> a;
        std::vector<double> b;
        for (const TrialRecord& r : report.trials) {
          if (!r.completed) continue;
          if (r.method == methods[i]) a.push_back(r.reduction[l]);
          if (r.method == methods[j]) b.push_back(r.reduction[l]);
        }
        if (a.size() < 2 || b.size() < 2) continue;
        report.tests.push_back({methods[i], methods[j], report.levels[l], welch_t_test(a, b)});
      }
    }
  }

  if (with_profiles) {
    for (Method method : methods) {
      for (Category cat : {Category::c1, Category::c2}) {
        const auto it = pooled.find({static_cast<int>(method), static_cast<int>(cat)});
        const std::vector<double> empty;
        const auto& values = it == pooled.end() ? empty : it->second;
        report.category_summaries.push_back(
            {method, cat, values.size(), values.empty() ? kNaN : models::median(values)});
      }
    }
    build_histogram(report, pooled, cfg.experiment.histogram_bins);
  }
  return report;
}

ComparisonReport run_gradient_analysis(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint_dir) {
  return run_comparison(cfg, true, checkpoint_dir);
}

// ---------------------------------------------------------------------------

StudyLoss rate_study_loss(const RateStudySection& cfg) {
  const auto width = static_cast<Eigen::Index>(cfg.hidden);
  ad::GraphBuilder g;
  const ad::NodeRef x = g.features(1);
  const ad::NodeRef w = g.parameter("W", width, 1);
  const ad::NodeRef b = g.parameter("b", width, 1);
  const ad::NodeRef v = g.parameter("v", 1, width);
  const ad::NodeRef c = g.parameter("c", 1, 1);
  const ad::NodeRef hidden = g.tanh(g.add(g.matvec(w, x), b));
  const ad::NodeRef out = g.add(g.matvec(v, hidden), c);
  auto graph = std::make_shared<const ad::ComputationGraph>(std::move(g).build(out));

  Rng rng(derive_seed(cfg.seed, 40));
  std::uniform_real_distribution<double> slope(-2.0, 2.0);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  std::uniform_real_distribution<double> weight(-1.0 / std::sqrt(static_cast<double>(width)),
                                                1.0 / std::sqrt(static_cast<double>(width)));
  Vector theta(graph->parameter_count());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < width; ++i) theta[k++] = slope(rng);
  for (Eigen::Index i = 0; i < width; ++i) theta[k++] = shift(rng);
  for (Eigen::Index i = 0; i < width; ++i) theta[k++] = weight(rng);
  theta[k++] = 0.0;

  StudyLoss out_loss;
  out_loss.graph = graph;
  objectives::Regularity reg;
  reg.holder_exponent = 1.0;
  out_loss.loss = std::make_unique<objectives::DifferentiableLoss>(*graph, std::move(theta), reg);
  return out_loss;
}

std::vector<double> alpha_grid(const RateStudySection& cfg) {
  std::vector<double> grid(cfg.alpha_count);
  const double ratio = cfg.alpha_min / cfg.alpha_max;
  for (std::size_t k = 0; k < cfg.alpha_count; ++k) {
    grid[k] = cfg.alpha_max * std::pow(ratio, static_cast<double>(k) / static_cast<double>(cfg.alpha_count - 1));
  }
  grid.back() = cfg.alpha_min;
  return grid;
}

double empirical_lipschitz(const objectives::DifferentiableLoss& h, std::vector<Sample> points,
                           const geometry::NormSpec& norm) {
  double best = 0.0;
  const bool one_dim = !points.empty() && points.front().x.size() == 1 && points.front().y.size() == 0;
  if (one_dim) {
    std::sort(points.begin(), points.end(), [](const Sample& a, const Sample& b) { return a.x[0] < b.x[0]; });
    double prev_x = points.front().x[0];
    double prev_h = h.value(points.front());
    for (std::size_t k = 1; k < points.size(); ++k) {
      const double x = points[k].x[0];
      const double v = h.value(points[k]);
      if (x > prev_x) best = std::max(best, std::abs(v - prev_h) / geometry::sample_distance(points[k], points[k - 1], norm));
      prev_x = x;
      prev_h = v;
    }
    return best;
  }
  std::vector<double> values;
  values.reserve(points.size());
  for (const Sample& z : points) values.push_back(h.value(z));
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = geometry::sample_distance(points[i], points[j], norm);
      if (d > 0.0) best = std::max(best, std::abs(values[i] - values[j]) / d);
    }
  }
  return best;
}

RateStudyResult run_rate_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const RateStudySection& rs = cfg.rate_study;
  const StudyLoss study = rate_study_loss(rs);
  const objectives::DifferentiableLoss& h = *study.loss;
  const measures::SampleSpaceSpec space =
      measures::SampleSpaceSpec::box(1, rs.lower, rs.upper, rs.grid_points);

  // Centers drawn in the inner half of the box and snapped to the grid.
  Rng rng(derive_seed(rs.seed, 41));
  const double inner = 0.5 * (rs.upper - rs.lower) / 1.5;
  const double mid = 0.5 * (rs.upper + rs.lower);
  std::uniform_real_distribution<double> u(mid - inner, mid + inner);
  std::vector<Sample> centers;
  for (std::size_t i = 0; i < rs.centers; ++i) {
    Vector x(1);
    x[0] = u(rng);
    centers.push_back(space.snap(Sample(std::move(x))));
  }
  const measures::EmpiricalMeasure measure(centers);
  const geometry::Order p = geometry::Order::rational(rs.order);
  const std::vector<double> alphas = alpha_grid(rs);

  // Mixing rates are drawn once; each radius only changes the floor, so the
  // displacement bound 2 (1 - gamma_min) C never exceeds beta.
  Rng mix_rng(derive_seed(rs.seed, 42));
  const auto partners = measures::mixup_partners(measure.size(), measures::MixupPairing::reversed_batch, mix_rng);
  std::vector<double> raw(measure.size());
  for (double& g : raw) g = measures::sample_beta(0.5, 0.5, mix_rng);
  double c_max = 0.0;
  for (const Sample& z : centers) c_max = std::max(c_max, geometry::norm(z, space.norm));
  const auto schedule = [&](double alpha) {
    const double beta = rs.beta_scale * std::pow(alpha, rs.beta_power);
    const double floor = c_max > 0.0 ? std::clamp(1.0 - beta / (2.0 * c_max), 0.0, 1.0) : 1.0;
    std::vector<double> gammas(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) gammas[i] = floor + (1.0 - floor) * raw[i];
    return measures::mixup_with_rates(measure, partners, gammas, space.norm);
  };

  RateStudyResult result;
  result.clean = oracle::approximation_rate_study(h, measure, p, alphas, space);
  result.perturbed = oracle::approximation_rate_study(h, measure, p, alphas, space, schedule);

  std::vector<Sample> points = space.grid();
  points.insert(points.end(), centers.begin(), centers.end());
  std::vector<measures::PerturbedMeasure> perturbed;
  for (double alpha : alphas) {
    perturbed.push_back(schedule(alpha));
    const auto& moved = perturbed.back().perturbed_points();
    points.insert(points.end(), moved.begin(), moved.end());
  }
  result.lipschitz = empirical_lipschitz(h, std::move(points), space.norm);
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    SandwichCheck s;
    s.alpha = alphas[k];
    s.beta = perturbed[k].displacement_bound();
    s.gap = std::abs(result.perturbed.plain[k] - result.perturbed.exact[k]);
    s.bound = result.lipschitz * (s.alpha + s.beta);
    s.holds = s.gap <= s.bound;
    result.sandwich.push_back(s);
  }
  return result;
}

// ---------------------------------------------------------------------------

SweepReport run_penalty_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepReport report;
  report.method = cfg.sweep.method;
  report.levels = cfg.experiment.contamination;
  for (std::size_t trial = 0; trial < cfg.experiment.trials; ++trial) {
    const TrialData td = trial_data(cfg, trial);
    const models::Model model(model_spec(cfg, td.train));
    std::vector<data::Dataset> contaminated;
    for (std::size_t l = 0; l < report.levels.size(); ++l) {
      contaminated.push_back(contaminate(cfg, td.test, trial, l, report.levels[l]));
    }
    for (double lambda : cfg.sweep.lambda_grad) {
      SweepRecord rec;
      rec.lambda_grad = lambda;
      rec.trial = trial;
      models::TrainConfig tc = train_config(cfg, cfg.sweep.method, trial);
      tc.checkpoints.clear();
      tc.lambda_grad = lambda;
      try {
        const models::TrainResult res = models::train(td.train, model, tc);
        const Evaluation e = evaluate(model, res.ema, td.test, contaminated);
        rec.clean_accuracy = e.clean;
        rec.contaminated = e.contaminated;
        rec.reduction = e.reduction;
      } catch (const models::TrainingDiverged& e) {
        rec.completed = false;
        rec.failure = e.what();
        rec.clean_accuracy = kNaN;
        rec.contaminated.assign(report.levels.size(), kNaN);
        rec.reduction.assign(report.levels.size(), kNaN);
      }
      report.records.push_back(std::move(rec));
    }
  }
  for (double lambda : cfg.sweep.lambda_grad) {
    std::vector<double> clean;
    std::vector<std::vector<double>> dirty(report.levels.size());
    std::vector<std::vector<double>> red(report.levels.size());
    for (const SweepRecord& r : report.records) {
      if (r.lambda_grad != lambda || !r.completed) continue;
      clean.push_back(r.clean_accuracy);
      for (std::size_t l = 0; l < report.levels.size(); ++l) {
        dirty[l].push_back(r.contaminated[l]);
        red[l].push_back(r.reduction[l]);
      }
    }
    const Stats cs = describe(clean);
    for (std::size_t l = 0; l < report.levels.size(); ++l) {
      report.summaries.push_back({lambda, report.levels[l], cs, describe(dirty[l]), describe(red[l])});
    }
  }
  return report;
}

}  // namespace wdro::experiments
