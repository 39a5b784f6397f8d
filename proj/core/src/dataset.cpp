#include <algorithm>
#include <cctype>
#include <string>

#include "trimsgd/dataio.hpp"
#include "trimsgd/error.hpp"
#include "trimsgd/rng.hpp"

namespace trimsgd {

std::string_view dataset_name(DatasetName name) {
  switch (name) {
    case DatasetName::MNIST: return "mnist";
    case DatasetName::FashionMNIST: return "fashion-mnist";
    case DatasetName::EMNISTLetters: return "emnist-letters";
  }
  return "unknown";
}

DatasetName parse_dataset_name(std::string_view text) {
  std::string t;
  for (char c : text) {
    if (c != '-' && c != '_') t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (t == "mnist") return DatasetName::MNIST;
  if (t == "fashionmnist" || t == "fashion") return DatasetName::FashionMNIST;
  if (t == "emnistletters" || t == "emnist") return DatasetName::EMNISTLetters;
  throw ConfigError("unknown dataset '" + std::string(text) +
                    "' (expected mnist, fashion-mnist, emnist-letters)");
}

std::size_t class_count(DatasetName name) {
  return name == DatasetName::EMNISTLetters ? 26 : 10;
}

double dataset_loss_scale(DatasetName name) {
  return name == DatasetName::MNIST ? 100.0 : 10.0;
}

Dataset make_dataset(DatasetName name, Split split, RealArray images,
                     std::vector<ClassLabel> labels) {
  if (images.empty() || images.dim(0) != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(images.empty() ? 0 : images.dim(0)) +
                         " images but " + std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(images[i] >= 0.0 && images[i] <= 1.0)) {
      throw InputError("pixel " + std::to_string(i) + " = " + std::to_string(images[i]) +
                       " is outside [0, 1]");
    }
  }
  const std::size_t l = class_count(name);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > l) {
      throw LabelError("label " + std::to_string(labels[i]) + " at example " + std::to_string(i) +
                       " is outside {1.." + std::to_string(l) + "}");
    }
  }
  Dataset d;
  d.name = name;
  d.split = split;
  d.images = std::move(images);
  d.labels = std::move(labels);
  d.num_classes = l;
  d.loss_scale = dataset_loss_scale(name);
  return d;
}

Dataset dataset_from_idx(DatasetName name, Split split, const IdxData& images,
                         const IdxData& labels) {
  if (images.dims.size() != 3) throw FormatError("image file must have 3 dimensions");
  if (labels.dims.size() != 1) throw FormatError("label file must have 1 dimension");
  const std::size_t n = images.dims[0];
  if (images.dims[1] != kImageSide || images.dims[2] != kImageSide) {
    throw FormatError(std::string(dataset_name(name)) + " images must be " +
                      std::to_string(kImageSide) + "x" + std::to_string(kImageSide) + ", got " +
                      std::to_string(images.dims[1]) + "x" + std::to_string(images.dims[2]));
  }
  if (labels.dims[0] != n) {
    throw DimensionError("image file holds " + std::to_string(n) + " examples, label file " +
                         std::to_string(labels.dims[0]));
  }
  std::vector<double> pixels(images.payload.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<double>(images.payload[i]) / 255.0;
  }
  RealArray tensor({n, 1, images.dims[1], images.dims[2]}, std::move(pixels));

  const ClassLabel shift = name == DatasetName::EMNISTLetters ? 0 : 1;
  std::vector<ClassLabel> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<ClassLabel>(labels.payload[i]) + shift;
  return make_dataset(name, split, std::move(tensor), std::move(ids));
}

IdxFileNames idx_file_names(DatasetName name, Split split) {
  const bool train = split == Split::Train;
  if (name == DatasetName::EMNISTLetters) {
    const std::string stem = train ? "emnist-letters-train" : "emnist-letters-test";
    return {stem + "-images-idx3-ubyte", stem + "-labels-idx1-ubyte"};
  }
  const std::string stem = train ? "train" : "t10k";
  return {stem + "-images-idx3-ubyte", stem + "-labels-idx1-ubyte"};
}

namespace {

std::filesystem::path locate(const std::filesystem::path& dir, DatasetName name,
                             const std::string& file) {
  const std::filesystem::path candidates[] = {
      dir / dataset_name(name) / file, dir / dataset_name(name) / (file + ".gz"),
      dir / file, dir / (file + ".gz")};
  for (const auto& p : candidates) {
    if (std::filesystem::is_regular_file(p)) return p;
  }
  throw FileError("cannot find " + file + "[.gz] under " + (dir / dataset_name(name)).string() +
                  " or " + dir.string());
}

}  // namespace

Dataset load_dataset(DatasetName name, Split split, const std::filesystem::path& dir) {
  const auto files = idx_file_names(name, split);
  const auto image_bytes = read_file_bytes(locate(dir, name, files.images));
  const auto label_bytes = read_file_bytes(locate(dir, name, files.labels));
  const IdxData images = parse_idx(image_bytes);
  const IdxData labels = parse_idx(label_bytes);
  if (images.dims.size() != 3) throw FormatError(files.images + " is not an image file");
  if (labels.dims.size() != 1) throw FormatError(files.labels + " is not a label file");
  return dataset_from_idx(name, split, images, labels);
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("subset needs at least one index");
  const std::size_t stride = data.example_size();
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  std::vector<double> pixels(indices.size() * stride);
  std::vector<ClassLabel> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= data.size()) {
      throw InputError("subset index " + std::to_string(src) + " out of range for " +
                       std::to_string(data.size()) + " examples");
    }
    std::copy_n(data.images.data() + src * stride, stride, pixels.data() + i * stride);
    labels[i] = data.labels[src];
  }
  Dataset out;
  out.name = data.name;
  out.split = data.split;
  out.num_classes = data.num_classes;
  out.loss_scale = data.loss_scale;
  out.images = RealArray(std::move(shape), std::move(pixels));
  out.labels = std::move(labels);
  return out;
}

BatchPlan plan_epoch(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  Xoshiro256 rng(derive_seed(derive_seed(seed, kBatchStream), epoch));
  return BatchPlan{seed, epoch, random_permutation(n, rng)};
}

MiniBatch gather_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("a mini-batch needs at least one example");
  const std::size_t stride = data.example_size();
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  std::vector<double> pixels(indices.size() * stride);
  MiniBatch batch;
  batch.indices.assign(indices.begin(), indices.end());
  batch.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(data.images.data() + indices[i] * stride, stride, pixels.data() + i * stride);
    batch.labels[i] = data.labels[indices[i]];
  }
  batch.inputs = RealArray(std::move(shape), std::move(pixels));
  return batch;
}

std::vector<std::span<const std::size_t>> batch_spans(const BatchPlan& plan,
                                                      std::size_t batch_size) {
  if (batch_size < 2) {
    throw ConfigError("batch size must be at least 2, got " + std::to_string(batch_size));
  }
  std::vector<std::span<const std::size_t>> spans;
  const std::span<const std::size_t> all(plan.permutation);
  for (std::size_t start = 0; start < all.size(); start += batch_size) {
    spans.push_back(all.subspan(start, std::min(batch_size, all.size() - start)));
  }
  return spans;
}

std::vector<MiniBatch> make_batches(const Dataset& data, std::size_t batch_size,
                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 2) {
    throw ConfigError("batch size must be at least 2, got " + std::to_string(batch_size));
  }
  const BatchPlan plan = plan_epoch(data.size(), seed, epoch);
  std::vector<MiniBatch> batches;
  for (auto span : batch_spans(plan, batch_size)) batches.push_back(gather_batch(data, span));
  return batches;
}

}  // namespace trimsgd
