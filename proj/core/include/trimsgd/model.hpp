#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trimsgd/real_array.hpp"

namespace trimsgd {

enum class Arch : std::uint32_t { NN2 = 0, NN3 = 1, LeNet = 2 };

std::string_view arch_name(Arch arch);
// Accepts "nn2", "nn-2", "nn3", "nn-3", "lenet" (case-insensitive).
Arch parse_arch(std::string_view text);

enum class LayerKind { Affine, Conv, Relu, MaxPool, Flatten };

/// One stage of a model. Shapes are per example (no batch axis).
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  Shape in_shape;
  Shape out_shape;
  // Parameter placement inside the model's flat buffer (Affine and Conv only).
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  Shape weight_shape;
  Shape bias_shape;
  // Conv only.
  std::size_t ksize = 0, stride = 1, pad = 0;

  bool has_params() const noexcept {
    return kind == LayerKind::Affine || kind == LayerKind::Conv;
  }
};

/// Where one parameter tensor lives inside a flat parameter vector.
struct ParamBlock {
  std::size_t layer = 0;
  std::string name;  // "weight" or "bias"
  Shape shape;
  std::size_t offset = 0;

  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

using ParamLayout = std::vector<ParamBlock>;

/// Flat vector of model parameters (or gradients) with the index map back
/// to layers. Gradients share the layout object of their model.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::shared_ptr<const ParamLayout> layout, std::vector<double> values);

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const ParamLayout& layout() const { return *layout_; }
  const std::shared_ptr<const ParamLayout>& layout_ptr() const noexcept { return layout_; }

  // Copy of one block, shaped as its parameter.
  RealArray block(std::size_t index) const;

 private:
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> values_;
};

class Model;

/// Per-batch intermediate values recorded by `forward` for `backward`.
///
/// Bound to one model state: any parameter change after the forward pass
/// makes the cache stale.
class ForwardCache {
 public:
  bool empty() const noexcept { return activations_.empty(); }
  std::size_t batch_size() const noexcept { return batch_; }

 private:
  friend RealArray forward(const Model&, const RealArray&, ForwardCache&);
  friend ParamVector backward(const Model&, const ForwardCache&, const RealArray&);

  std::uint64_t model_id_ = 0;
  std::uint64_t model_version_ = 0;
  std::size_t batch_ = 0;
  std::vector<std::vector<double>> activations_;  // input of each layer, plus the logits
  std::vector<std::vector<std::uint32_t>> pool_masks_;
};

/// Layered classifier: NN-2, NN-3 or LeNet.
///
/// Parameters live in one contiguous buffer in ParamVector order. Copies get
/// a fresh identity so caches taken on one copy are rejected by the other.
class Model {
 public:
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  Arch arch() const noexcept { return arch_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  std::size_t input_size() const noexcept { return element_count(input_shape_); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }

  std::size_t param_count() const noexcept { return params_.size(); }
  std::span<const double> params() const noexcept { return params_; }
  // Mutable access invalidates every outstanding ForwardCache.
  std::span<double> mutable_params() noexcept;

  const std::shared_ptr<const ParamLayout>& layout() const noexcept { return layout_; }
  RealArray param(std::size_t block) const;
  void set_param(std::size_t block, const RealArray& value);

  std::uint64_t id() const noexcept { return id_; }
  std::uint64_t version() const noexcept { return version_; }

 private:
  friend Model build_model(Arch, const Shape&, std::size_t, std::uint64_t);
  Model() = default;

  Arch arch_ = Arch::NN2;
  Shape input_shape_;
  std::size_t num_classes_ = 0;
  std::vector<LayerSpec> layers_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> params_;
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
};

inline constexpr std::size_t kHiddenWidth = 256;

/// Builds NN-2, NN-3 or LeNet with He-uniform weights drawn from `init_seed`
/// and zero biases.
///
/// NN-2/NN-3 accept any input shape and flatten it. LeNet needs (C, H, W)
/// with H and W such that both conv+pool stages tile exactly (28x28 gives
/// the classic 400-wide flatten).
Model build_model(Arch arch, const Shape& input_shape, std::size_t num_classes,
                  std::uint64_t init_seed);

/// Logits [N x L]. `inputs` is [N x input_shape...] or [N x input_size].
RealArray forward(const Model& model, const RealArray& inputs);
RealArray forward(const Model& model, const RealArray& inputs, ForwardCache& cache);

/// Gradient of sum_n <logit_grads[n], logits[n]> w.r.t. every parameter.
/// Throws StateError when the cache is empty, from another model, or stale.
ParamVector backward(const Model& model, const ForwardCache& cache, const RealArray& logit_grads);

ParamVector flatten(const Model& model);
void unflatten(Model& model, const ParamVector& params);

// Checkpoint file: "TGM1", then little-endian u32 arch id, u32 input rank,
// u32 extents..., u32 class count, u64 parameter count, f64 parameters.
std::vector<std::uint8_t> checkpoint_bytes(const Model& model);
Model model_from_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace trimsgd
