#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "wdro/model.hpp"

namespace wdro::models {

namespace {

constexpr char kMagic[8] = {'W', 'D', 'R', 'O', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t k = 0; k < sizeof(T); ++k) out.put(static_cast<char>((bits >> (8 * k)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  template <typename T>
  T get(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw std::runtime_error(path_ + ": truncated at byte offset " + std::to_string(pos_) + " while reading " +
                               what);
    }
    U bits = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      bits |= static_cast<U>(static_cast<std::uint8_t>(bytes_[pos_ + k])) << (8 * k);
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const char* data() const { return bytes_.data(); }
  void skip(std::size_t n) { pos_ += n; }

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw std::runtime_error(path_ + ": byte offset " + std::to_string(at) + ": " + msg);
  }

 private:
  std::string path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  checkpoint.spec.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.spec.widths.size()));
  for (Eigen::Index w : checkpoint.spec.widths) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  for (Activation a : checkpoint.spec.activations) put_le<std::uint8_t>(out, static_cast<std::uint8_t>(a));
  put_le<double>(out, checkpoint.spec.leaky_slope);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.parameters.size()));
  for (const Vector& v : checkpoint.parameters) {
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) put_le<double>(out, v[k]);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path,
                      const std::string& config_json) {
  write_checkpoint(checkpoint, path);
  if (config_json.empty()) return;
  std::ofstream side(path.string() + ".json", std::ios::binary);
  if (!side) throw std::runtime_error("cannot write " + path.string() + ".json");
  side << config_json;
  if (config_json.back() != '\n') side << '\n';
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader in(path);
  if (in.remaining() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
    in.fail(0, "bad magic; expected \"WDROCKPT\"");
  }
  in.skip(sizeof kMagic);
  const std::size_t version_at = in.offset();
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    in.fail(version_at, "unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  const std::size_t count_at = in.offset();
  const auto width_count = in.get<std::uint32_t>("width count");
  if (width_count < 2 || width_count > 1024) in.fail(count_at, "implausible width count");
  for (std::uint32_t k = 0; k < width_count; ++k) ck.spec.widths.push_back(in.get<std::uint32_t>("width"));
  for (std::uint32_t k = 0; k + 2 < width_count; ++k) {
    const std::size_t at = in.offset();
    const auto a = in.get<std::uint8_t>("activation");
    if (a > 1) in.fail(at, "unknown activation code " + std::to_string(a));
    ck.spec.activations.push_back(static_cast<Activation>(a));
  }
  ck.spec.leaky_slope = in.get<double>("leaky slope");
  ck.spec.validate();
  const auto vectors = in.get<std::uint32_t>("vector count");
  for (std::uint32_t v = 0; v < vectors; ++v) {
    const std::size_t at = in.offset();
    const auto len = in.get<std::uint64_t>("vector length");
    if (len > in.remaining() / 8) in.fail(at, "vector length exceeds file size");
    Vector theta(static_cast<Eigen::Index>(len));
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] = in.get<double>("parameter");
    ck.parameters.push_back(std::move(theta));
  }
  if (in.remaining() != 0) in.fail(in.offset(), "trailing bytes");
  return ck;
}

}  // namespace wdro::models
