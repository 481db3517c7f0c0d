#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "wdro/config.hpp"
#include "wdro/dataset.hpp"
#include "wdro/experiments.hpp"
#include "wdro/report_io.hpp"

namespace fs = std::filesystem;
using namespace wdro;

namespace {

constexpr int kExitIncomplete = 1;
constexpr int kExitError = 3;

struct RunOptions {
  std::string config;
  std::string out = "runs";
  std::string overrides;
  bool save_checkpoints = false;
};

void add_run_options(CLI::App* cmd, RunOptions& opts, bool checkpoints) {
  cmd->add_option("-c,--config", opts.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", opts.out, "Parent directory for run outputs")->capture_default_str();
  cmd->add_option("--set", opts.overrides, "JSON object of overrides applied after --config");
  if (checkpoints) cmd->add_flag("--save-checkpoints", opts.save_checkpoints, "Save trained parameters");
}

experiments::ExperimentConfig resolve(const RunOptions& opts) {
  experiments::ExperimentConfig cfg = opts.config.empty() ? experiments::ExperimentConfig{}
                                                          : experiments::load_config(opts.config);
  if (!opts.overrides.empty()) cfg = experiments::merge_config(cfg, opts.overrides);
  cfg.validate();
  return cfg;
}

fs::path prepare_run_dir(const RunOptions& opts, const std::string& command,
                         const experiments::ExperimentConfig& cfg) {
  const fs::path dir = fs::path(opts.out) / (command + "-" + experiments::config_hash(cfg));
  fs::create_directories(dir);
  std::ofstream(dir / "config.json", std::ios::binary) << experiments::to_json(cfg);
  return dir;
}

void print_summary(const experiments::ComparisonReport& r) {
  for (const auto& s : r.summaries) {
    std::printf("%-9s level=%-6g clean=%.4f contaminated=%.4f reduction=%.4f +- %.4f (median %.4f, n=%zu)\n",
                experiments::method_name(s.method), s.level, s.clean.mean, s.contaminated.mean, s.reduction.mean,
                s.reduction.std, s.reduction.median, s.reduction.n);
  }
  for (const auto& c : r.category_summaries) {
    std::printf("%-9s %s median grad=%.6g (n=%zu)\n", experiments::method_name(c.method),
                experiments::category_name(c.category), c.median, c.count);
  }
  for (const auto& rec : r.trials) {
    if (!rec.completed) {
      std::fprintf(stderr, "trial %zu of %s failed: %s\n", rec.trial, experiments::method_name(rec.method),
                   rec.failure.c_str());
    }
  }
}

int run_compare(const RunOptions& opts, const std::string& command, bool profiles) {
  const auto cfg = resolve(opts);
  const fs::path dir = prepare_run_dir(opts, command, cfg);
  const fs::path ckpt = opts.save_checkpoints ? dir / "checkpoints" : fs::path{};
  const auto report = experiments::run_comparison(cfg, profiles, ckpt);
  report::write_comparison(dir, report);
  print_summary(report);
  std::printf("outputs: %s\n", dir.string().c_str());
  return report.all_completed() ? 0 : kExitIncomplete;
}

int run_rate(const RunOptions& opts) {
  const auto cfg = resolve(opts);
  const fs::path dir = prepare_run_dir(opts, "rate-study", cfg);
  const auto r = experiments::run_rate_study(cfg);
  report::write_rate_study(dir, r);
  std::printf("clean slope %.4f (plain %.4f), mixup slope %.4f, lipschitz %.6g\n", r.clean.fit.slope,
              r.clean.plain_fit.slope, r.perturbed.fit.slope, r.lipschitz);
  for (const auto& note : r.clean.notes) std::printf("note (clean): %s\n", note.c_str());
  for (const auto& note : r.perturbed.notes) std::printf("note (mixup): %s\n", note.c_str());
  std::printf("outputs: %s\n", dir.string().c_str());
  return 0;
}

int run_sweep(const RunOptions& opts) {
  const auto cfg = resolve(opts);
  const fs::path dir = prepare_run_dir(opts, "sweep", cfg);
  const auto r = experiments::run_penalty_sweep(cfg);
  report::write_sweep(dir, r);
  for (const auto& s : r.summaries) {
    std::printf("lambda=%-8g level=%-6g contaminated=%.4f +- %.4f reduction=%.4f\n", s.lambda_grad, s.level,
                s.contaminated.mean, s.contaminated.std, s.reduction.mean);
  }
  std::printf("outputs: %s\n", dir.string().c_str());
  return r.all_completed() ? 0 : kExitIncomplete;
}

struct GenOptions {
  std::string generator = "low-res-digits-subset";
  std::size_t n = 2000;
  long dimension = 64;
  int classes = 10;
  double noise = 0.8;
  std::uint64_t seed = 1;
  std::string format = "csv";
  std::string output;
};

int run_gen(const GenOptions& o) {
  data::SyntheticSpec spec;
  spec.generator = data::parse_generator(o.generator);
  spec.n = o.n;
  spec.dimension = o.dimension;
  spec.num_classes = o.classes;
  spec.noise = o.noise;
  spec.seed = o.seed;
  const data::Dataset ds = data::generate(spec);
  const fs::path out(o.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (data::parse_format(o.format) == data::FileFormat::csv) {
    data::write_csv(ds, out);
    std::printf("wrote %zu rows of dimension %ld to %s\n", ds.size(), static_cast<long>(ds.dimension()),
                out.string().c_str());
  } else {
    const fs::path labels = data::idx_labels_path(out);
    data::write_idx(ds, out, labels);
    std::printf("wrote %zu rows of dimension %ld to %s and %s\n", ds.size(), static_cast<long>(ds.dimension()),
                out.string().c_str(), labels.string().c_str());
  }
  return 0;
}

int run_inspect(const std::string& path, const std::string& format) {
  const data::Dataset ds = data::load_dataset(path, data::parse_format(format));
  std::printf("rows %zu\ndimension %ld\nclasses %d\n", ds.size(), static_cast<long>(ds.dimension()),
              ds.num_classes);
  if (ds.size() > 0) {
    std::printf("feature range [%g, %g]\n", ds.features.minCoeff(), ds.features.maxCoeff());
  }
  std::map<int, std::size_t> counts;
  for (int y : ds.labels) ++counts[y];
  for (const auto& [label, count] : counts) std::printf("label %d: %zu\n", label, count);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein distributionally robust training and worst-case risk studies"};
  app.require_subcommand(1);

  RunOptions compare_opts, grad_opts, rate_opts, sweep_opts;
  auto* compare = app.add_subcommand("compare", "Accuracy reduction of the four methods under contamination");
  add_run_options(compare, compare_opts, true);
  auto* grad = app.add_subcommand("grad-analysis", "Input-gradient profiles and the C1/C2 split");
  add_run_options(grad, grad_opts, true);
  auto* rate = app.add_subcommand("rate-study", "Surrogate versus exact worst-case risk over a radius grid");
  add_run_options(rate, rate_opts, false);
  auto* sweep = app.add_subcommand("sweep", "Contaminated accuracy across penalty weights");
  add_run_options(sweep, sweep_opts, false);

  auto* dataset = app.add_subcommand("dataset", "Generate or inspect datasets");
  dataset->require_subcommand(1);
  GenOptions gen_opts;
  auto* gen = dataset->add_subcommand("gen", "Write a synthetic dataset");
  gen->add_option("--generator", gen_opts.generator, "gaussian-blobs | two-moons-like | low-res-digits-subset")
      ->capture_default_str();
  gen->add_option("-n,--rows", gen_opts.n, "Number of points")->capture_default_str();
  gen->add_option("--dimension", gen_opts.dimension, "Feature dimension")->capture_default_str();
  gen->add_option("--classes", gen_opts.classes, "Number of classes")->capture_default_str();
  gen->add_option("--noise", gen_opts.noise, "Noise scale")->capture_default_str();
  gen->add_option("--seed", gen_opts.seed, "Generator seed")->capture_default_str();
  gen->add_option("--format", gen_opts.format, "csv | idx")->capture_default_str();
  gen->add_option("output", gen_opts.output, "Output path (IDX labels go next to it)")->required();
  std::string inspect_path;
  std::string inspect_format = "csv";
  auto* inspect = dataset->add_subcommand("inspect", "Summarize a dataset file");
  inspect->add_option("path", inspect_path, "Dataset path (IDX: the images file)")->required();
  inspect->add_option("--format", inspect_format, "csv | idx")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compare) return run_compare(compare_opts, "compare", false);
    if (*grad) return run_compare(grad_opts, "grad-analysis", true);
    if (*rate) return run_rate(rate_opts);
    if (*sweep) return run_sweep(sweep_opts);
    if (*gen) return run_gen(gen_opts);
    if (*inspect) return run_inspect(inspect_path, inspect_format);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
