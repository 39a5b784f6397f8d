#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "trimsgd/error.hpp"
#include "trimsgd/model.hpp"

namespace trimsgd {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'M', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw LengthError("checkpoint truncated at byte " + std::to_string(pos_) + " of " +
                        std::to_string(bytes_.size()));
    }
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const Model& model) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, static_cast<std::uint32_t>(model.arch()));
  put_le(out, static_cast<std::uint32_t>(model.input_shape().size()));
  for (std::size_t e : model.input_shape()) put_le(out, static_cast<std::uint32_t>(e));
  put_le(out, static_cast<std::uint32_t>(model.num_classes()));
  put_le(out, static_cast<std::uint64_t>(model.param_count()));
  out.reserve(out.size() + model.param_count() * sizeof(double));
  for (double v : model.params()) put_le(out, v);
  return out;
}

Model model_from_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a model checkpoint (missing TGM1 magic)");
  }
  Reader in(bytes.subspan(4));
  const auto arch_id = in.get<std::uint32_t>();
  if (arch_id > static_cast<std::uint32_t>(Arch::LeNet)) {
    throw FormatError("checkpoint has unknown architecture id " + std::to_string(arch_id));
  }
  const auto rank = in.get<std::uint32_t>();
  if (rank == 0 || rank > 8) throw FormatError("checkpoint input rank " + std::to_string(rank));
  Shape input(rank);
  for (auto& e : input) e = in.get<std::uint32_t>();
  const auto classes = in.get<std::uint32_t>();
  const auto count = in.get<std::uint64_t>();

  Model model = build_model(static_cast<Arch>(arch_id), input, classes, 0);
  if (count != model.param_count()) {
    throw FormatError("checkpoint declares " + std::to_string(count) +
                      " parameters, architecture needs " + std::to_string(model.param_count()));
  }
  if (in.remaining() != count * sizeof(double)) {
    throw LengthError("checkpoint payload: expected " + std::to_string(count * sizeof(double)) +
                      " bytes, got " + std::to_string(in.remaining()));
  }
  auto params = model.mutable_params();
  for (auto& v : params) v = in.get<double>();
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto bytes = checkpoint_bytes(model);
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_checkpoint(bytes);
}

}  // namespace trimsgd
