#include "wdro/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wdro::report {

using experiments::Category;
using experiments::ComparisonReport;
using experiments::method_name;
using experiments::parse_method;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return v;
}

namespace {

std::size_t parse_size(const std::string& text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a count: '" + text + "'");
  }
  return v;
}

std::string str(std::size_t v) { return std::to_string(v); }

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json stats_json(const experiments::Stats& s) {
  return {{"n", s.n}, {"mean", num(s.mean)}, {"std", num(s.std)}, {"median", num(s.median)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw std::invalid_argument("missing column '" + name + "'");
}

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw std::runtime_error(path.string() + ": empty file");
  return t;
}

void write_table(const std::filesystem::path& path, const CsvTable& table) {
  std::string text;
  auto line = [&text](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) text += ',';
      text += cells[k];
    }
    text += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  write_text(path, text);
}

CsvTable trials_table(const ComparisonReport& r) {
  CsvTable t{{"method", "trial", "completed", "level", "clean_accuracy", "contaminated_accuracy", "reduction"}, {}};
  for (const auto& rec : r.trials) {
    for (std::size_t l = 0; l < r.levels.size(); ++l) {
      t.rows.push_back({method_name(rec.method), str(rec.trial), rec.completed ? "1" : "0",
                        format_double(r.levels[l]), format_double(rec.clean_accuracy),
                        format_double(rec.contaminated[l]), format_double(rec.reduction[l])});
    }
  }
  return t;
}

std::vector<experiments::TrialRecord> parse_trials(const CsvTable& t, std::vector<double>* levels) {
  const std::size_t cm = t.column("method"), ct = t.column("trial"), cc = t.column("completed"),
                    cl = t.column("level"), ca = t.column("clean_accuracy"),
                    cd = t.column("contaminated_accuracy"), cr = t.column("reduction");
  std::vector<experiments::TrialRecord> out;
  std::map<std::pair<int, std::size_t>, std::size_t> index;
  std::vector<double> seen;
  for (const auto& row : t.rows) {
    const auto method = parse_method(row[cm]);
    const std::size_t trial = parse_size(row[ct]);
    const double level = parse_double(row[cl]);
    const auto key = std::pair{static_cast<int>(method), trial};
    auto it = index.find(key);
    if (it == index.end()) {
      experiments::TrialRecord rec;
      rec.method = method;
      rec.trial = trial;
      rec.completed = row[cc] == "1";
      rec.clean_accuracy = parse_double(row[ca]);
      it = index.emplace(key, out.size()).first;
      out.push_back(std::move(rec));
    }
    auto& rec = out[it->second];
    if (rec.contaminated.size() >= seen.size()) seen.push_back(level);
    rec.contaminated.push_back(parse_double(row[cd]));
    rec.reduction.push_back(parse_double(row[cr]));
  }
  if (levels) *levels = seen;
  return out;
}

CsvTable summary_table(const ComparisonReport& r) {
  CsvTable t{{"method", "level", "n", "clean_mean", "clean_std", "contaminated_mean", "contaminated_std",
              "reduction_mean", "reduction_std", "reduction_median"},
             {}};
  for (const auto& s : r.summaries) {
    t.rows.push_back({method_name(s.method), format_double(s.level), str(s.reduction.n),
                      format_double(s.clean.mean), format_double(s.clean.std), format_double(s.contaminated.mean),
                      format_double(s.contaminated.std), format_double(s.reduction.mean),
                      format_double(s.reduction.std), format_double(s.reduction.median)});
  }
  return t;
}

CsvTable welch_table(const ComparisonReport& r) {
  CsvTable t{{"method_a", "method_b", "level", "t", "df", "p_value"}, {}};
  for (const auto& p : r.tests) {
    t.rows.push_back({method_name(p.a), method_name(p.b), format_double(p.level), format_double(p.test.t),
                      format_double(p.test.df), format_double(p.test.p_value)});
  }
  return t;
}

CsvTable gradient_quartiles_table(const ComparisonReport& r) {
  CsvTable t{{"method", "trial", "step", "q1", "median", "q3"}, {}};
  for (const auto& g : r.gradients) {
    t.rows.push_back({method_name(g.method), str(g.trial), str(g.step), format_double(g.quartiles.q1),
                      format_double(g.quartiles.median), format_double(g.quartiles.q3)});
  }
  return t;
}

std::vector<experiments::GradientRecord> parse_gradient_quartiles(const CsvTable& t) {
  const std::size_t cm = t.column("method"), ct = t.column("trial"), cs = t.column("step"), c1 = t.column("q1"),
                    c2 = t.column("median"), c3 = t.column("q3");
  std::vector<experiments::GradientRecord> out;
  for (const auto& row : t.rows) {
    out.push_back({parse_method(row[cm]), parse_size(row[ct]), parse_size(row[cs]),
                   {parse_double(row[c1]), parse_double(row[c2]), parse_double(row[c3])}});
  }
  return out;
}

CsvTable gradient_categories_table(const ComparisonReport& r) {
  CsvTable t{{"method", "trial", "category", "count", "median"}, {}};
  for (const auto& c : r.categories) {
    t.rows.push_back({method_name(c.method), str(c.trial), experiments::category_name(c.category), str(c.count),
                      format_double(c.median)});
  }
  for (const auto& c : r.category_summaries) {
    t.rows.push_back({method_name(c.method), "all", experiments::category_name(c.category), str(c.count),
                      format_double(c.median)});
  }
  return t;
}

CsvTable gradient_histogram_table(const ComparisonReport& r) {
  CsvTable t{{"method", "category", "lower", "upper", "count"}, {}};
  for (const auto& h : r.histogram) {
    t.rows.push_back({method_name(h.method), experiments::category_name(h.category), format_double(h.lower),
                      format_double(h.upper), str(h.count)});
  }
  return t;
}

CsvTable rate_table(const oracle::RateReport& r) {
  CsvTable t{{"alpha", "beta", "exact", "surrogate", "error", "plain", "plain_error"}, {}};
  for (std::size_t k = 0; k < r.alpha_grid.size(); ++k) {
    t.rows.push_back({format_double(r.alpha_grid[k]), format_double(r.betas[k]), format_double(r.exact[k]),
                      format_double(r.surrogate[k]), format_double(r.errors[k]), format_double(r.plain[k]),
                      format_double(r.plain_errors[k])});
  }
  return t;
}

oracle::RateReport parse_rate(const CsvTable& t) {
  const std::size_t ca = t.column("alpha"), cb = t.column("beta"), ce = t.column("exact"),
                    cs = t.column("surrogate"), cr = t.column("error"), cp = t.column("plain"),
                    cq = t.column("plain_error");
  oracle::RateReport r;
  for (const auto& row : t.rows) {
    r.alpha_grid.push_back(parse_double(row[ca]));
    r.betas.push_back(parse_double(row[cb]));
    r.exact.push_back(parse_double(row[ce]));
    r.surrogate.push_back(parse_double(row[cs]));
    r.errors.push_back(parse_double(row[cr]));
    r.plain.push_back(parse_double(row[cp]));
    r.plain_errors.push_back(parse_double(row[cq]));
  }
  r.fit = oracle::fit_log_log(r.alpha_grid, r.errors);
  r.plain_fit = oracle::fit_log_log(r.alpha_grid, r.plain_errors);
  return r;
}

CsvTable sweep_table(const experiments::SweepReport& r) {
  CsvTable t{{"lambda_grad", "trial", "completed", "level", "clean_accuracy", "contaminated_accuracy", "reduction"},
             {}};
  for (const auto& rec : r.records) {
    for (std::size_t l = 0; l < r.levels.size(); ++l) {
      t.rows.push_back({format_double(rec.lambda_grad), str(rec.trial), rec.completed ? "1" : "0",
                        format_double(r.levels[l]), format_double(rec.clean_accuracy),
                        format_double(rec.contaminated[l]), format_double(rec.reduction[l])});
    }
  }
  return t;
}

CsvTable sweep_summary_table(const experiments::SweepReport& r) {
  CsvTable t{{"lambda_grad", "level", "n", "clean_mean", "clean_std", "contaminated_mean", "contaminated_std",
              "reduction_mean", "reduction_std", "reduction_median"},
             {}};
  for (const auto& s : r.summaries) {
    t.rows.push_back({format_double(s.lambda_grad), format_double(s.level), str(s.reduction.n),
                      format_double(s.clean.mean), format_double(s.clean.std), format_double(s.contaminated.mean),
                      format_double(s.contaminated.std), format_double(s.reduction.mean),
                      format_double(s.reduction.std), format_double(s.reduction.median)});
  }
  return t;
}

void write_comparison(const std::filesystem::path& dir, const ComparisonReport& r) {
  std::filesystem::create_directories(dir);
  write_table(dir / "trials.csv", trials_table(r));
  write_table(dir / "summary.csv", summary_table(r));
  write_table(dir / "welch.csv", welch_table(r));
  nlohmann::json j;
  j["all_completed"] = r.all_completed();
  j["levels"] = r.levels;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& rec : r.trials) {
    if (!rec.completed) failures.push_back({{"method", method_name(rec.method)}, {"trial", rec.trial}, {"error", rec.failure}});
  }
  j["failures"] = failures;
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : r.summaries) {
    summaries.push_back({{"method", method_name(s.method)},
                         {"level", s.level},
                         {"clean_accuracy", stats_json(s.clean)},
                         {"contaminated_accuracy", stats_json(s.contaminated)},
                         {"reduction", stats_json(s.reduction)}});
  }
  j["summaries"] = summaries;
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& p : r.tests) {
    tests.push_back({{"method_a", method_name(p.a)},
                     {"method_b", method_name(p.b)},
                     {"level", p.level},
                     {"t", num(p.test.t)},
                     {"df", num(p.test.df)},
                     {"p_value", num(p.test.p_value)}});
  }
  j["welch"] = tests;
  if (!r.gradients.empty()) {
    write_table(dir / "gradient_quartiles.csv", gradient_quartiles_table(r));
    write_table(dir / "gradient_categories.csv", gradient_categories_table(r));
    write_table(dir / "gradient_histogram.csv", gradient_histogram_table(r));
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& c : r.category_summaries) {
      cats.push_back({{"method", method_name(c.method)},
                      {"category", experiments::category_name(c.category)},
                      {"count", c.count},
                      {"median", num(c.median)}});
    }
    j["categories"] = cats;
  }
  write_text(dir / "report.json", j.dump(2) + "\n");
}

void write_rate_study(const std::filesystem::path& dir, const experiments::RateStudyResult& r) {
  std::filesystem::create_directories(dir);
  write_table(dir / "rate_clean.csv", rate_table(r.clean));
  write_table(dir / "rate_mixup.csv", rate_table(r.perturbed));
  auto fit = [](const oracle::LogLogFit& f) {
    return nlohmann::json{{"slope", num(f.slope)}, {"intercept", num(f.intercept)},
                          {"points_used", f.points_used}, {"defined", f.defined}};
  };
  nlohmann::json sandwich = nlohmann::json::array();
  for (const auto& s : r.sandwich) {
    sandwich.push_back({{"alpha", s.alpha}, {"beta", s.beta}, {"gap", s.gap}, {"bound", s.bound}, {"holds", s.holds}});
  }
  const nlohmann::json j{{"clean", {{"fit", fit(r.clean.fit)}, {"notes", r.clean.notes}}},
                         {"mixup",
                          {{"fit", fit(r.perturbed.fit)},
                           {"plain_fit", fit(r.perturbed.plain_fit)},
                           {"notes", r.perturbed.notes}}},
                         {"lipschitz", r.lipschitz},
                         {"sandwich", sandwich}};
  write_text(dir / "rate_summary.json", j.dump(2) + "\n");
}

void write_sweep(const std::filesystem::path& dir, const experiments::SweepReport& r) {
  std::filesystem::create_directories(dir);
  write_table(dir / "sweep.csv", sweep_table(r));
  write_table(dir / "sweep_summary.csv", sweep_summary_table(r));
}

}  // namespace wdro::report
