#pragma once

// Run outputs. CSV files are comma separated with one header line, '\n'
// line endings and doubles in shortest round-trip form ("nan" for missing
// values). Each table has a reader so outputs can be re-parsed exactly.

#include <filesystem>
#include <string>
#include <vector>

#include "wdro/experiments.hpp"

namespace wdro::report {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const CsvTable& table);

// Comparison outputs.
CsvTable trials_table(const experiments::ComparisonReport& r);
CsvTable summary_table(const experiments::ComparisonReport& r);
CsvTable welch_table(const experiments::ComparisonReport& r);
CsvTable gradient_quartiles_table(const experiments::ComparisonReport& r);
CsvTable gradient_categories_table(const experiments::ComparisonReport& r);
CsvTable gradient_histogram_table(const experiments::ComparisonReport& r);

/// Rebuilds per-trial records (and levels) from a trials table.
std::vector<experiments::TrialRecord> parse_trials(const CsvTable& t, std::vector<double>* levels = nullptr);
std::vector<experiments::GradientRecord> parse_gradient_quartiles(const CsvTable& t);

// Rate study.
CsvTable rate_table(const oracle::RateReport& r);
oracle::RateReport parse_rate(const CsvTable& t);

// Sweep.
CsvTable sweep_table(const experiments::SweepReport& r);
CsvTable sweep_summary_table(const experiments::SweepReport& r);

/// Writes trials.csv, summary.csv, welch.csv and report.json; with gradient
/// profiles also gradient_quartiles.csv, gradient_categories.csv and
/// gradient_histogram.csv.
void write_comparison(const std::filesystem::path& dir, const experiments::ComparisonReport& r);
/// rate_clean.csv, rate_mixup.csv and rate_summary.json.
void write_rate_study(const std::filesystem::path& dir, const experiments::RateStudyResult& r);
/// sweep.csv, sweep_summary.csv.
void write_sweep(const std::filesystem::path& dir, const experiments::SweepReport& r);

}  // namespace wdro::report
