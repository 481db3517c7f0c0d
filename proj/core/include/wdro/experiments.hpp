#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wdro/config.hpp"
#include "wdro/dataset.hpp"
#include "wdro/model.hpp"
#include "wdro/objectives.hpp"
#include "wdro/worst_case.hpp"

namespace wdro::experiments {

struct Stats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 when n < 2
  double median = 0.0;
};

Stats describe(const std::vector<double>& values);

struct WelchTest {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided; NaN statistics when both variances vanish
};

/// Welch's unequal-variance t-test.
WelchTest welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct TrialRecord {
  Method method = Method::erm;
  std::size_t trial = 0;
  bool completed = true;
  std::string failure;
  double clean_accuracy = 0.0;
  std::vector<double> contaminated;  // per level
  std::vector<double> reduction;     // clean - contaminated, per level
};

struct MethodSummary {
  Method method = Method::erm;
  double level = 0.0;
  Stats clean;
  Stats contaminated;
  Stats reduction;
};

struct PairTest {
  Method a = Method::erm;
  Method b = Method::wdro;
  double level = 0.0;
  WelchTest test;  // on per-trial reductions
};

struct GradientRecord {
  Method method = Method::erm;
  std::size_t trial = 0;
  std::size_t step = 0;
  models::Quartiles quartiles;
};

enum class Category { c1, c2 };
const char* category_name(Category c);

struct CategoryRecord {
  Method method = Method::erm;
  std::size_t trial = 0;
  Category category = Category::c1;
  std::size_t count = 0;
  double median = 0.0;  // NaN when count == 0
};

struct CategorySummary {
  Method method = Method::erm;
  Category category = Category::c1;
  std::size_t count = 0;
  double median = 0.0;  // pooled over trials
};

struct HistogramBin {
  Method method = Method::erm;
  Category category = Category::c1;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

/// Accuracy reductions for every (method, trial, level) and, when profiles
/// are requested, gradient quartiles and the C1 / C2 split. C1 holds test
/// points classified correctly both clean and contaminated, C2 those
/// correct only when clean.
struct ComparisonReport {
  std::vector<double> levels;
  std::vector<TrialRecord> trials;
  std::vector<MethodSummary> summaries;
  std::vector<PairTest> tests;
  std::vector<GradientRecord> gradients;
  std::vector<CategoryRecord> categories;
  std::vector<CategorySummary> category_summaries;
  std::vector<HistogramBin> histogram;

  bool all_completed() const;
};

/// Train and test sets of one trial.
struct TrialData {
  data::Dataset train;
  data::Dataset test;
};
TrialData trial_data(const ExperimentConfig& cfg, std::size_t trial);

/// Contaminated copy of a test set for one (trial, level index).
data::Dataset contaminate(const ExperimentConfig& cfg, const data::Dataset& test, std::size_t trial,
                          std::size_t level_index, double probability);

models::ModelSpec model_spec(const ExperimentConfig& cfg, const data::Dataset& train);

/// When `checkpoint_dir` is non-empty the raw and EMA parameters of every
/// completed run are saved there as <method>-trial<k>.ckpt.
ComparisonReport run_comparison(const ExperimentConfig& cfg, bool with_profiles = false,
                                const std::filesystem::path& checkpoint_dir = {});
ComparisonReport run_gradient_analysis(const ExperimentConfig& cfg,
                                       const std::filesystem::path& checkpoint_dir = {});

// ---------------------------------------------------------------------------
// Oracle studies.

/// Scalar tanh network h(x) = v . tanh(W x + b) + c on a 1-D sample space.
struct StudyLoss {
  std::shared_ptr<const ad::ComputationGraph> graph;
  std::unique_ptr<objectives::DifferentiableLoss> loss;
};
StudyLoss rate_study_loss(const RateStudySection& cfg);

struct SandwichCheck {
  double alpha = 0.0;
  double beta = 0.0;
  double gap = 0.0;    // |R(P') - worst case|
  double bound = 0.0;  // L (alpha + beta)
  bool holds = false;
};

struct RateStudyResult {
  oracle::RateReport clean;
  oracle::RateReport perturbed;
  double lipschitz = 0.0;
  std::vector<SandwichCheck> sandwich;
};

/// Geometric radius grid from alpha_max down to alpha_min.
std::vector<double> alpha_grid(const RateStudySection& cfg);
RateStudyResult run_rate_study(const ExperimentConfig& cfg);

/// Largest |h(a) - h(b)| / ||a - b|| over the given points (1-D inputs are
/// sorted and only neighbours compared, which gives the same maximum).
double empirical_lipschitz(const objectives::DifferentiableLoss& h, std::vector<Sample> points,
                           const geometry::NormSpec& norm = {});

// ---------------------------------------------------------------------------
// Penalty sweep.

struct SweepRecord {
  double lambda_grad = 0.0;
  std::size_t trial = 0;
  bool completed = true;
  std::string failure;
  double clean_accuracy = 0.0;
  std::vector<double> contaminated;
  std::vector<double> reduction;
};

struct SweepSummary {
  double lambda_grad = 0.0;
  double level = 0.0;
  Stats clean;
  Stats contaminated;
  Stats reduction;
};

struct SweepReport {
  Method method = Method::wdro;
  std::vector<double> levels;
  std::vector<SweepRecord> records;
  std::vector<SweepSummary> summaries;
  bool all_completed() const;
};

SweepReport run_penalty_sweep(const ExperimentConfig& cfg);

}  // namespace wdro::experiments
