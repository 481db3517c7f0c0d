#include "wdro/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wdro::experiments {

using nlohmann::json;

const char* method_name(Method m) {
  switch (m) {
    case Method::erm: return "erm";
    case Method::wdro: return "wdro";
    case Method::mixup: return "mixup";
    case Method::wdro_mix: return "wdro+mix";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "erm") return Method::erm;
  if (name == "wdro") return Method::wdro;
  if (name == "mixup") return Method::mixup;
  if (name == "wdro+mix") return Method::wdro_mix;
  throw std::invalid_argument("unknown method '" + name + "' (expected erm, wdro, mixup or wdro+mix)");
}

bool uses_penalty(Method m) { return m == Method::wdro || m == Method::wdro_mix; }
bool uses_mixup(Method m) { return m == Method::mixup || m == Method::wdro_mix; }

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw std::invalid_argument("config: " + key + ": " + what);
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) bad(key, what);
}

json to_json_value(const ExperimentConfig& c) {
  json methods = json::array();
  for (Method m : c.experiment.methods) methods.push_back(method_name(m));
  json j;
  j["experiment"] = {
      {"methods", methods},
      {"trials", c.experiment.trials},
      {"data_seed", c.experiment.data_seed},
      {"train_seed", c.experiment.train_seed},
      {"contamination_seed", c.experiment.contamination_seed},
      {"contamination", c.experiment.contamination},
      {"category_level", c.experiment.category_level},
      {"gradient_checkpoints", c.experiment.gradient_checkpoints},
      {"histogram_bins", c.experiment.histogram_bins},
  };
  j["data"] = {
      {"source", c.data.source},
      {"generator", data::generator_name(c.data.generator)},
      {"n_train", c.data.n_train},
      {"n_test", c.data.n_test},
      {"dimension", c.data.dimension},
      {"classes", c.data.classes},
      {"noise", c.data.noise},
      {"path", c.data.path},
      {"format", c.data.format},
      {"test_path", c.data.test_path},
      {"test_fraction", c.data.test_fraction},
  };
  j["model"] = {
      {"hidden", c.model.hidden},
      {"activation", models::activation_name(c.model.activation)},
      {"leaky_slope", c.model.leaky_slope},
  };
  j["train"] = {
      {"batch_size", c.train.batch_size},
      {"lambda_grad", c.train.lambda_grad},
      {"learning_rate", c.train.learning_rate},
      {"adam_beta1", c.train.adam_beta1},
      {"adam_beta2", c.train.adam_beta2},
      {"adam_epsilon", c.train.adam_epsilon},
      {"ema_decay", c.train.ema_decay},
      {"weight_decay", c.train.weight_decay},
      {"total_examples", c.train.total_examples},
      {"mixup_shape_a", c.train.mixup_shape_a},
      {"mixup_shape_b", c.train.mixup_shape_b},
  };
  j["rate_study"] = {
      {"order", c.rate_study.order},
      {"alpha_max", c.rate_study.alpha_max},
      {"alpha_min", c.rate_study.alpha_min},
      {"alpha_count", c.rate_study.alpha_count},
      {"grid_points", c.rate_study.grid_points},
      {"lower", c.rate_study.lower},
      {"upper", c.rate_study.upper},
      {"centers", c.rate_study.centers},
      {"hidden", c.rate_study.hidden},
      {"seed", c.rate_study.seed},
      {"beta_scale", c.rate_study.beta_scale},
      {"beta_power", c.rate_study.beta_power},
  };
  j["sweep"] = {
      {"method", method_name(c.sweep.method)},
      {"lambda_grad", c.sweep.lambda_grad},
  };
  return j;
}

template <typename T>
void read(const json& section, const std::string& prefix, const char* key, T& out) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    bad(prefix + "." + key, std::string("wrong type (") + e.what() + ")");
  }
}

void check_keys(const json& section, const std::string& prefix, const json& reference) {
  if (!section.is_object()) bad(prefix, "must be an object");
  for (auto it = section.begin(); it != section.end(); ++it) {
    if (!reference.contains(it.key())) bad(prefix + "." + it.key(), "unknown key");
  }
}

ExperimentConfig apply_overrides(ExperimentConfig c, const json& j) {
  const json reference = to_json_value(c);
  if (!j.is_object()) bad("<root>", "must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!reference.contains(it.key())) bad(it.key(), "unknown section");
    check_keys(it.value(), it.key(), reference[it.key()]);
  }
  if (j.contains("experiment")) {
    const json& s = j["experiment"];
    if (s.contains("methods")) {
      std::vector<std::string> names;
      read(s, "experiment", "methods", names);
      c.experiment.methods.clear();
      for (const auto& n : names) c.experiment.methods.push_back(parse_method(n));
    }
    read(s, "experiment", "trials", c.experiment.trials);
    read(s, "experiment", "data_seed", c.experiment.data_seed);
    read(s, "experiment", "train_seed", c.experiment.train_seed);
    read(s, "experiment", "contamination_seed", c.experiment.contamination_seed);
    read(s, "experiment", "contamination", c.experiment.contamination);
    read(s, "experiment", "category_level", c.experiment.category_level);
    read(s, "experiment", "gradient_checkpoints", c.experiment.gradient_checkpoints);
    read(s, "experiment", "histogram_bins", c.experiment.histogram_bins);
  }
  if (j.contains("data")) {
    const json& s = j["data"];
    read(s, "data", "source", c.data.source);
    if (s.contains("generator")) {
      std::string g;
      read(s, "data", "generator", g);
      c.data.generator = data::parse_generator(g);
    }
    read(s, "data", "n_train", c.data.n_train);
    read(s, "data", "n_test", c.data.n_test);
    read(s, "data", "dimension", c.data.dimension);
    read(s, "data", "classes", c.data.classes);
    read(s, "data", "noise", c.data.noise);
    read(s, "data", "path", c.data.path);
    read(s, "data", "format", c.data.format);
    read(s, "data", "test_path", c.data.test_path);
    read(s, "data", "test_fraction", c.data.test_fraction);
  }
  if (j.contains("model")) {
    const json& s = j["model"];
    read(s, "model", "hidden", c.model.hidden);
    if (s.contains("activation")) {
      std::string a;
      read(s, "model", "activation", a);
      c.model.activation = models::parse_activation(a);
    }
    read(s, "model", "leaky_slope", c.model.leaky_slope);
  }
  if (j.contains("train")) {
    const json& s = j["train"];
    read(s, "train", "batch_size", c.train.batch_size);
    read(s, "train", "lambda_grad", c.train.lambda_grad);
    read(s, "train", "learning_rate", c.train.learning_rate);
    read(s, "train", "adam_beta1", c.train.adam_beta1);
    read(s, "train", "adam_beta2", c.train.adam_beta2);
    read(s, "train", "adam_epsilon", c.train.adam_epsilon);
    read(s, "train", "ema_decay", c.train.ema_decay);
    read(s, "train", "weight_decay", c.train.weight_decay);
    read(s, "train", "total_examples", c.train.total_examples);
    read(s, "train", "mixup_shape_a", c.train.mixup_shape_a);
    read(s, "train", "mixup_shape_b", c.train.mixup_shape_b);
  }
  if (j.contains("rate_study")) {
    const json& s = j["rate_study"];
    read(s, "rate_study", "order", c.rate_study.order);
    read(s, "rate_study", "alpha_max", c.rate_study.alpha_max);
    read(s, "rate_study", "alpha_min", c.rate_study.alpha_min);
    read(s, "rate_study", "alpha_count", c.rate_study.alpha_count);
    read(s, "rate_study", "grid_points", c.rate_study.grid_points);
    read(s, "rate_study", "lower", c.rate_study.lower);
    read(s, "rate_study", "upper", c.rate_study.upper);
    read(s, "rate_study", "centers", c.rate_study.centers);
    read(s, "rate_study", "hidden", c.rate_study.hidden);
    read(s, "rate_study", "seed", c.rate_study.seed);
    read(s, "rate_study", "beta_scale", c.rate_study.beta_scale);
    read(s, "rate_study", "beta_power", c.rate_study.beta_power);
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    if (s.contains("method")) {
      std::string m;
      read(s, "sweep", "method", m);
      c.sweep.method = parse_method(m);
    }
    read(s, "sweep", "lambda_grad", c.sweep.lambda_grad);
  }
  c.validate();
  return c;
}

json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(origin + ": JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!experiment.methods.empty(), "experiment.methods", "must list at least one method");
  require(experiment.trials >= 1, "experiment.trials", "must be >= 1");
  for (double p : experiment.contamination) {
    require(p >= 0.0 && p <= 1.0, "experiment.contamination", "probabilities must lie in [0, 1]");
  }
  require(experiment.category_level >= 0.0 && experiment.category_level <= 1.0, "experiment.category_level",
          "must lie in [0, 1]");
  require(experiment.histogram_bins >= 1, "experiment.histogram_bins", "must be >= 1");
  require(data.source == "synthetic" || data.source == "file", "data.source", "must be synthetic or file");
  if (data.source == "file") {
    require(!data.path.empty(), "data.path", "required for file sources");
    data::parse_format(data.format);
    if (data.test_path.empty()) {
      require(data.test_fraction > 0.0 && data.test_fraction < 1.0, "data.test_fraction", "must lie in (0, 1)");
    }
  } else {
    require(data.n_train >= 1 && data.n_test >= 1, "data.n_train", "train and test sizes must be >= 1");
    require(data.noise >= 0.0, "data.noise", "must be >= 0");
  }
  for (Eigen::Index h : model.hidden) require(h >= 1, "model.hidden", "widths must be >= 1");
  require(train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(train.lambda_grad >= 0.0, "train.lambda_grad", "must be >= 0");
  require(train.ema_decay >= 0.0 && train.ema_decay < 1.0, "train.ema_decay", "must lie in [0, 1)");
  require(train.weight_decay >= 0.0 && train.weight_decay < 1.0, "train.weight_decay", "must lie in [0, 1)");
  require(train.mixup_shape_a > 0.0 && train.mixup_shape_b > 0.0, "train.mixup_shape_a", "must be positive");
  require(rate_study.order >= 2, "rate_study.order", "must be an integer >= 2");
  require(rate_study.alpha_max > rate_study.alpha_min && rate_study.alpha_min > 0.0, "rate_study.alpha_min",
          "need 0 < alpha_min < alpha_max");
  require(rate_study.alpha_count >= 2, "rate_study.alpha_count", "must be >= 2");
  require(rate_study.grid_points >= 201, "rate_study.grid_points", "must be >= 201");
  require(rate_study.upper > rate_study.lower, "rate_study.upper", "must exceed lower");
  require(rate_study.centers >= 1 && rate_study.hidden >= 1, "rate_study.centers", "must be >= 1");
  require(rate_study.beta_scale >= 0.0, "rate_study.beta_scale", "must be >= 0");
  require(sweep.lambda_grad.size() >= 2, "sweep.lambda_grad", "needs at least two values");
  for (double l : sweep.lambda_grad) require(l >= 0.0, "sweep.lambda_grad", "values must be >= 0");
}

ExperimentConfig parse_config(const std::string& json_text) {
  return apply_overrides(ExperimentConfig{}, parse_text(json_text, "config"));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return apply_overrides(ExperimentConfig{}, parse_text(buf.str(), path.string()));
}

std::string to_json(const ExperimentConfig& cfg) { return to_json_value(cfg).dump(2) + "\n"; }

ExperimentConfig merge_config(const ExperimentConfig& base, const std::string& json_overrides) {
  return apply_overrides(base, parse_text(json_overrides, "override"));
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json_value(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

models::TrainConfig train_config(const ExperimentConfig& cfg, Method method, std::size_t trial) {
  models::TrainConfig t;
  t.batch_size = cfg.train.batch_size;
  t.lambda_grad = uses_penalty(method) ? cfg.train.lambda_grad : 0.0;
  if (uses_mixup(method)) {
    measures::MixupConfig mix;
    mix.shape_a = cfg.train.mixup_shape_a;
    mix.shape_b = cfg.train.mixup_shape_b;
    t.mixup = mix;
  }
  t.adam.learning_rate = cfg.train.learning_rate;
  t.adam.beta1 = cfg.train.adam_beta1;
  t.adam.beta2 = cfg.train.adam_beta2;
  t.adam.epsilon = cfg.train.adam_epsilon;
  t.ema_decay = cfg.train.ema_decay;
  t.weight_decay = cfg.train.weight_decay;
  t.total_examples = cfg.train.total_examples;
  // Every method shares the initialization and batch stream of a trial.
  t.seed = derive_seed(cfg.experiment.train_seed, 20, trial);
  const std::size_t steps = t.steps();
  const std::size_t k = cfg.experiment.gradient_checkpoints;
  for (std::size_t c = 1; c <= k && steps > 0; ++c) {
    const std::size_t s = std::max<std::size_t>(1, (steps * c) / k);
    if (t.checkpoints.empty() || s > t.checkpoints.back()) t.checkpoints.push_back(s);
  }
  return t;
}

}  // namespace wdro::experiments
