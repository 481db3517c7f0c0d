#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "wdro/measures.hpp"
#include "wdro/sample.hpp"

namespace wdro::data {

/// Labelled feature matrix; column j is example j. Features live in [-1, 1].
struct Dataset {
  Matrix features;          // dimension x size
  std::vector<int> labels;  // in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dimension() const { return features.rows(); }
  /// Throws std::invalid_argument on inconsistent shapes or labels out of range.
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  Vector one_hot(std::size_t i) const;
  Sample sample(std::size_t i) const;
};

bool operator==(const Dataset& a, const Dataset& b);

enum class FileFormat { csv, idx };
FileFormat parse_format(const std::string& name);

/// CSV: one example per line, features then the integer label, no header.
/// A first line that does not parse as numbers is taken as a header and
/// skipped. Features already inside [-1, 1] are kept; otherwise all
/// features are min-max scaled to [-1, 1] with one global range.
Dataset read_csv(const std::filesystem::path& path);
/// Writes shortest round-trip decimal representations.
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

/// IDX pair. The images magic is 00 00 TT NN where TT is 0x08 (uint8,
/// mapped to v / 127.5 - 1) or 0x0D (float64) and NN >= 2 is the number of
/// dimensions (n x d1 x ...). The labels magic is 00 00 08 01 with dim n.
/// Header integers and float64 payloads are big-endian. write_idx always
/// emits float64 images with NN = 2.
Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_idx(const Dataset& dataset, const std::filesystem::path& images,
               const std::filesystem::path& labels);

/// Dispatches on format. For IDX, `path` names the images file and the
/// labels file is found by replacing "images" with "labels" in its name, or
/// by appending ".labels".
Dataset load_dataset(const std::filesystem::path& path, FileFormat format);
std::filesystem::path idx_labels_path(const std::filesystem::path& images);

enum class Generator { gaussian_blobs, two_moons, low_res_digits };
Generator parse_generator(const std::string& name);
const char* generator_name(Generator g);

struct SyntheticSpec {
  Generator generator = Generator::gaussian_blobs;
  std::size_t n = 2000;
  Eigen::Index dimension = 2;  // fixed at 64 for low_res_digits, 2 for two_moons
  int num_classes = 4;         // fixed at 2 for two_moons
  double noise = 0.25;
  std::uint64_t seed = 0;
};

/// Deterministic synthetic data, clipped to [-1, 1].
Dataset generate(const SyntheticSpec& spec);

/// Salt-and-pepper contamination: every feature coordinate is replaced by
/// -1 or +1 (equally likely) with probability `probability`.
Dataset salt_pepper(const Dataset& dataset, double probability, Rng& rng);

/// Uniform measure with one-hot labels.
measures::EmpiricalMeasure to_measure(const Dataset& dataset);

/// Splits off the last `test_fraction` of a random permutation.
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction, Rng& rng);

}  // namespace wdro::data
