#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trimsgd/nn.hpp"
#include "trimsgd/real_array.hpp"

namespace trimsgd {

/// Decoded IDX container: big-endian dimension sizes and the raw bytes.
struct IdxData {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // ubyte, 1 dim
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // ubyte, 3 dims

/// Parses an uncompressed IDX buffer. Only unsigned-byte label (1-dim) and
/// image (3-dim) files are accepted; the payload must match the header
/// exactly.
IdxData parse_idx(std::span<const std::uint8_t> bytes);

/// Reads a whole file, inflating it first when it starts with the gzip magic.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// value / 255 per byte. Returned as a flat array.
RealArray normalize(std::span<const std::uint8_t> raw);

inline constexpr std::size_t kImageSide = 28;  // every supported dataset is 28x28

enum class DatasetName { MNIST, FashionMNIST, EMNISTLetters };
enum class Split { Train, Test };

std::string_view dataset_name(DatasetName name);
// Accepts "mnist", "fashion-mnist"/"fashionmnist"/"fashion", "emnist-letters"/"emnist".
DatasetName parse_dataset_name(std::string_view text);
std::size_t class_count(DatasetName name);     // 10, 10, 26
double dataset_loss_scale(DatasetName name);   // 100 for MNIST, 10 otherwise

/// Labeled image set. images is [n x 1 x 28 x 28] with pixels in [0, 1];
/// labels are 1-based class ids.
struct Dataset {
  DatasetName name = DatasetName::MNIST;
  Split split = Split::Train;
  RealArray images;
  std::vector<ClassLabel> labels;
  std::size_t num_classes = 0;
  double loss_scale = 1.0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t example_size() const { return images.size() / labels.size(); }
  Shape example_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
};

/// Validates the invariants (matching counts, pixels in [0,1], labels in
/// {1..L}) and assembles a Dataset.
Dataset make_dataset(DatasetName name, Split split, RealArray images,
                     std::vector<ClassLabel> labels);

/// Builds a dataset from decoded IDX image and label containers. Images must
/// be 28x28 and the two files must hold the same count. MNIST and
/// Fashion-MNIST labels are shifted from 0..9 to 1..10; EMNIST-Letters
/// labels are already 1..26.
Dataset dataset_from_idx(DatasetName name, Split split, const IdxData& images,
                         const IdxData& labels);

/// Standard IDX file names for a dataset split, without any .gz suffix.
struct IdxFileNames {
  std::string images;
  std::string labels;
};
IdxFileNames idx_file_names(DatasetName name, Split split);

/// Locates and loads a split. Looks in `dir/<dataset>/` and then `dir/`,
/// trying each file name with and without a ".gz" suffix.
Dataset load_dataset(DatasetName name, Split split, const std::filesystem::path& dir);

/// Examples at `indices`, in that order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Positions {0..n-1} in the order a given epoch visits them.
struct BatchPlan {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::vector<std::size_t> permutation;
};

/// Fresh uniform permutation fully determined by (seed, epoch).
BatchPlan plan_epoch(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

struct MiniBatch {
  std::vector<std::size_t> indices;  // positions in the source dataset
  RealArray inputs;                  // [B x example shape]
  std::vector<ClassLabel> labels;
};

MiniBatch gather_batch(const Dataset& data, std::span<const std::size_t> indices);

/// Consecutive chunks of `batch_size` from the epoch permutation. The last
/// chunk keeps whatever remains. batch_size must be at least 2.
std::vector<MiniBatch> make_batches(const Dataset& data, std::size_t batch_size,
                                    std::uint64_t seed, std::uint64_t epoch);

/// Chunk boundaries only, for callers that gather batches lazily.
std::vector<std::span<const std::size_t>> batch_spans(const BatchPlan& plan,
                                                      std::size_t batch_size);

}  // namespace trimsgd
