#include "wdro/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace wdro::data {

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.cols()) != labels.size()) {
    throw std::invalid_argument("dataset: " + std::to_string(features.cols()) + " feature columns but " +
                                std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1) throw std::invalid_argument("dataset: num_classes must be >= 1");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) + " of example " +
                                  std::to_string(i) + " is outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(features.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.features.col(static_cast<Eigen::Index>(k)) = features.col(static_cast<Eigen::Index>(indices[k]));
    out.labels.push_back(labels[indices[k]]);
  }
  return out;
}

Vector Dataset::one_hot(std::size_t i) const {
  Vector y = Vector::Zero(num_classes);
  y[labels[i]] = 1.0;
  return y;
}

Sample Dataset::sample(std::size_t i) const {
  return Sample(features.col(static_cast<Eigen::Index>(i)), one_hot(i));
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.num_classes == b.num_classes && a.labels == b.labels &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features;
}

FileFormat parse_format(const std::string& name) {
  if (name == "csv") return FileFormat::csv;
  if (name == "idx") return FileFormat::idx;
  throw std::invalid_argument("unknown dataset format '" + name + "' (expected csv or idx)");
}

namespace {

bool parse_double(std::string_view token, double& out) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) {
    token.remove_suffix(1);
  }
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void scale_to_unit_box(Matrix& features) {
  if (features.size() == 0) return;
  const double lo = features.minCoeff();
  const double hi = features.maxCoeff();
  if (lo >= -1.0 && hi <= 1.0) return;
  if (hi == lo) {
    features.setZero();
    return;
  }
  features = ((features.array() - lo) * (2.0 / (hi - lo)) - 1.0).matrix();
  features = features.cwiseMax(-1.0).cwiseMin(1.0);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (!parse_double(fields[k], values[k])) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (fields.size() < 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": need at least one feature and a label");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    }
    const double label = values.back();
    if (label < 0.0 || label != std::floor(label) || label > 1e6) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": label must be a non-negative integer");
    }
    labels.push_back(static_cast<int>(label));
    values.pop_back();
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(width - 1), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t k = 0; k + 1 < width; ++k) {
      ds.features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[j][k];
    }
  }
  scale_to_unit_box(ds.features);
  ds.labels = std::move(labels);
  ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    for (Eigen::Index k = 0; k < dataset.dimension(); ++k) {
      out << format_double(dataset.features(k, static_cast<Eigen::Index>(j))) << ',';
    }
    out << dataset.labels[j] << '\n';
  }
}

namespace {

constexpr std::uint8_t kTypeUint8 = 0x08;
constexpr std::uint8_t kTypeFloat64 = 0x0D;

class ByteReader {
 public:
  ByteReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t count, const char* what) {
    if (remaining() < count) {
      throw std::runtime_error(path_ + ": truncated at byte offset " + std::to_string(pos_) + " while reading " +
                               what);
    }
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint32_t be32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_++]);
    return v;
  }

  double be_f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_++]);
    return std::bit_cast<double>(v);
  }

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw std::runtime_error(path_ + ": byte offset " + std::to_string(at) + ": " + msg);
  }

 private:
  std::string path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

void put_be_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>(v >> (56 - 8 * k));
  out.write(b, 8);
}

}  // namespace

Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  ByteReader img(images);
  const std::uint8_t z0 = img.u8("magic");
  const std::uint8_t z1 = img.u8("magic");
  const std::uint8_t type = img.u8("magic");
  const std::uint8_t ndims = img.u8("magic");
  if (z0 != 0 || z1 != 0 || (type != kTypeUint8 && type != kTypeFloat64) || ndims < 2) {
    img.fail(0, "bad images magic; expected 00 00 08 NN (uint8) or 00 00 0D NN (float64) with NN >= 2");
  }
  std::size_t n = img.be32("dimension");
  std::size_t d = 1;
  for (int k = 1; k < ndims; ++k) d *= img.be32("dimension");
  if (d == 0 || n == 0) img.fail(4, "zero-sized dimension");

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  const std::size_t item = type == kTypeUint8 ? 1 : 8;
  if (img.remaining() != n * d * item) {
    img.fail(img.offset(), "payload holds " + std::to_string(img.remaining()) + " bytes, expected " +
                               std::to_string(n * d * item));
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      const double v = type == kTypeUint8 ? img.u8("pixel") / 127.5 - 1.0 : img.be_f64("value");
      ds.features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
    }
  }
  if (type == kTypeFloat64) scale_to_unit_box(ds.features);

  ByteReader lab(labels);
  const std::uint32_t magic = lab.be32("magic");
  if (magic != 0x00000801u) lab.fail(0, "bad labels magic; expected 00 00 08 01");
  const std::size_t count = lab.be32("dimension");
  if (count != n) lab.fail(4, "holds " + std::to_string(count) + " labels for " + std::to_string(n) + " images");
  if (lab.remaining() != n) {
    lab.fail(lab.offset(), "payload holds " + std::to_string(lab.remaining()) + " bytes, expected " +
                               std::to_string(n));
  }
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t j = 0; j < n; ++j) {
    ds.labels[j] = lab.u8("label");
    max_label = std::max(max_label, ds.labels[j]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  dataset.validate();
  if (dataset.num_classes > 256) throw std::invalid_argument("IDX labels hold at most 256 classes");
  {
    std::ofstream out(images, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + images.string());
    out.put(0).put(0).put(static_cast<char>(kTypeFloat64)).put(2);
    put_be32(out, static_cast<std::uint32_t>(dataset.size()));
    put_be32(out, static_cast<std::uint32_t>(dataset.dimension()));
    for (std::size_t j = 0; j < dataset.size(); ++j) {
      for (Eigen::Index k = 0; k < dataset.dimension(); ++k) {
        put_be_f64(out, dataset.features(k, static_cast<Eigen::Index>(j)));
      }
    }
  }
  std::ofstream out(labels, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + labels.string());
  put_be32(out, 0x00000801u);
  put_be32(out, static_cast<std::uint32_t>(dataset.size()));
  for (int label : dataset.labels) out.put(static_cast<char>(static_cast<std::uint8_t>(label)));
}

std::filesystem::path idx_labels_path(const std::filesystem::path& images) {
  std::string name = images.filename().string();
  const auto pos = name.find("images");
  if (pos != std::string::npos) {
    name.replace(pos, 6, "labels");
    return images.parent_path() / name;
  }
  return images.string() + ".labels";
}

Dataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  Dataset ds = format == FileFormat::csv ? read_csv(path) : read_idx(path, idx_labels_path(path));
  ds.validate();
  return ds;
}

Generator parse_generator(const std::string& name) {
  if (name == "gaussian-blobs") return Generator::gaussian_blobs;
  if (name == "two-moons-like") return Generator::two_moons;
  if (name == "low-res-digits-subset") return Generator::low_res_digits;
  throw std::invalid_argument("unknown generator '" + name +
                              "' (expected gaussian-blobs, two-moons-like or low-res-digits-subset)");
}

const char* generator_name(Generator g) {
  switch (g) {
    case Generator::gaussian_blobs: return "gaussian-blobs";
    case Generator::two_moons: return "two-moons-like";
    case Generator::low_res_digits: return "low-res-digits-subset";
  }
  return "unknown";
}

namespace {

// 8x8 digit glyphs, one row per string.
constexpr std::array<std::array<const char*, 8>, 10> kGlyphs = {{
    {"..####..", ".#....#.", ".#...##.", ".#..#.#.", ".#.#..#.", ".##...#.", ".#....#.", "..####.."},
    {"...##...", "..###...", ".#.##...", "...##...", "...##...", "...##...", "...##...", ".######."},
    {"..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."},
    {"..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####.."},
    {".....#..", "....##..", "...#.#..", "..#..#..", ".#...#..", ".######.", ".....#..", ".....#.."},
    {".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."},
    {"...###..", "..#.....", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."},
    {"..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {"..####..", ".#....#.", ".#....#.", ".#....#.", "..#####.", "......#.", ".....#..", "..###..."},
}};

double clip(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

Dataset generate(const SyntheticSpec& spec) {
  if (spec.n == 0) throw std::invalid_argument("synthetic data: n must be positive");
  if (!(spec.noise >= 0.0)) throw std::invalid_argument("synthetic data: noise must be >= 0");
  Rng rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.labels.resize(spec.n);

  switch (spec.generator) {
    case Generator::gaussian_blobs: {
      if (spec.dimension < 1 || spec.num_classes < 2) {
        throw std::invalid_argument("gaussian-blobs: need dimension >= 1 and >= 2 classes");
      }
      const int k = spec.num_classes;
      Matrix centers(spec.dimension, k);
      if (spec.dimension == 2) {
        for (int c = 0; c < k; ++c) {
          const double angle = 2.0 * std::numbers::pi * c / k;
          centers(0, c) = 0.5 * std::cos(angle);
          centers(1, c) = 0.5 * std::sin(angle);
        }
      } else {
        std::uniform_real_distribution<double> u(-0.6, 0.6);
        for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = u(rng);
      }
      ds.num_classes = k;
      ds.features.resize(spec.dimension, static_cast<Eigen::Index>(spec.n));
      for (std::size_t j = 0; j < spec.n; ++j) {
        const int c = static_cast<int>(j % static_cast<std::size_t>(k));
        ds.labels[j] = c;
        for (Eigen::Index r = 0; r < spec.dimension; ++r) {
          ds.features(r, static_cast<Eigen::Index>(j)) = clip(centers(r, c) + spec.noise * gauss(rng));
        }
      }
      break;
    }
    case Generator::two_moons: {
      ds.num_classes = 2;
      ds.features.resize(2, static_cast<Eigen::Index>(spec.n));
      std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
      for (std::size_t j = 0; j < spec.n; ++j) {
        const int c = static_cast<int>(j % 2);
        const double t = u(rng);
        double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
        // Map [-1, 2] x [-0.5, 1] into the unit box.
        x = (x - 0.5) / 1.6;
        y = (y - 0.25) / 0.8;
        ds.labels[j] = c;
        ds.features(0, static_cast<Eigen::Index>(j)) = clip(x + spec.noise * gauss(rng));
        ds.features(1, static_cast<Eigen::Index>(j)) = clip(y + spec.noise * gauss(rng));
      }
      break;
    }
    case Generator::low_res_digits: {
      if (spec.num_classes < 2 || spec.num_classes > 10) {
        throw std::invalid_argument("low-res-digits-subset: num_classes must be in [2, 10]");
      }
      ds.num_classes = spec.num_classes;
      ds.features.resize(64, static_cast<Eigen::Index>(spec.n));
      std::uniform_int_distribution<int> shift(-1, 1);
      for (std::size_t j = 0; j < spec.n; ++j) {
        const int c = static_cast<int>(j % static_cast<std::size_t>(spec.num_classes));
        ds.labels[j] = c;
        const int dx = shift(rng);
        const int dy = shift(rng);
        for (int r = 0; r < 8; ++r) {
          for (int col = 0; col < 8; ++col) {
            const int sr = r - dy;
            const int sc = col - dx;
            const bool on = sr >= 0 && sr < 8 && sc >= 0 && sc < 8 && kGlyphs[c][sr][sc] == '#';
            const double v = (on ? 1.0 : -1.0) + spec.noise * gauss(rng);
            ds.features(r * 8 + col, static_cast<Eigen::Index>(j)) = clip(v);
          }
        }
      }
      break;
    }
  }
  ds.validate();
  return ds;
}

Dataset salt_pepper(const Dataset& dataset, double probability, Rng& rng) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw std::invalid_argument("salt-and-pepper: probability must lie in [0, 1]");
  }
  Dataset out = dataset;
  std::bernoulli_distribution hit(probability);
  std::bernoulli_distribution salt(0.5);
  for (Eigen::Index j = 0; j < out.features.cols(); ++j) {
    for (Eigen::Index k = 0; k < out.features.rows(); ++k) {
      if (hit(rng)) out.features(k, j) = salt(rng) ? 1.0 : -1.0;
    }
  }
  return out;
}

measures::EmpiricalMeasure to_measure(const Dataset& dataset) {
  std::vector<Sample> points;
  points.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) points.push_back(dataset.sample(i));
  return measures::EmpiricalMeasure(std::move(points));
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("train/test split: fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(dataset.size())));
  if (n_test == 0 || n_test >= dataset.size()) throw std::invalid_argument("train/test split: empty side");
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> test(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  return {dataset.subset(train), dataset.subset(test)};
}

}  // namespace wdro::data
