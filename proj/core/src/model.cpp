#include "trimsgd/model.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <string>

#include "trimsgd/error.hpp"
#include "trimsgd/nn.hpp"
#include "trimsgd/rng.hpp"

namespace trimsgd {

namespace {

std::uint64_t next_model_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

class StackBuilder {
 public:
  explicit StackBuilder(Shape input) : current_(std::move(input)) {}

  void flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    l.in_shape = current_;
    l.out_shape = {element_count(current_)};
    push(std::move(l));
  }

  void affine(std::size_t out) {
    if (current_.size() != 1) throw InvariantViolation("affine layer needs a flat input");
    LayerSpec l;
    l.kind = LayerKind::Affine;
    l.in_shape = current_;
    l.out_shape = {out};
    l.weight_shape = {current_[0], out};
    l.bias_shape = {out};
    place(l);
    push(std::move(l));
  }

  void conv(std::size_t filters, std::size_t ksize, std::size_t pad) {
    const auto g = nn::kernel::ConvGeometry::make(1, current_[0], current_[1], current_[2],
                                                  filters, ksize, 1, pad);
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.in_shape = current_;
    l.out_shape = {filters, g.out_height, g.out_width};
    l.weight_shape = {filters, current_[0], ksize, ksize};
    l.bias_shape = {filters};
    l.ksize = ksize;
    l.stride = 1;
    l.pad = pad;
    place(l);
    push(std::move(l));
  }

  void relu() {
    LayerSpec l;
    l.kind = LayerKind::Relu;
    l.in_shape = current_;
    l.out_shape = current_;
    push(std::move(l));
  }

  void maxpool() {
    if (current_[1] % 2 != 0 || current_[2] % 2 != 0) {
      throw GeometryError("maxpool2x2 needs even spatial extents, got H=" +
                          std::to_string(current_[1]) + " W=" + std::to_string(current_[2]));
    }
    LayerSpec l;
    l.kind = LayerKind::MaxPool;
    l.in_shape = current_;
    l.out_shape = {current_[0], current_[1] / 2, current_[2] / 2};
    push(std::move(l));
  }

  std::vector<LayerSpec> layers;
  ParamLayout layout;
  std::size_t param_total = 0;

 private:
  void place(LayerSpec& l) {
    const std::size_t index = layers.size();
    l.weight_offset = param_total;
    layout.push_back({index, "weight", l.weight_shape, param_total});
    param_total += element_count(l.weight_shape);
    l.bias_offset = param_total;
    layout.push_back({index, "bias", l.bias_shape, param_total});
    param_total += element_count(l.bias_shape);
  }

  void push(LayerSpec l) {
    current_ = l.out_shape;
    layers.push_back(std::move(l));
  }

  Shape current_;
};

std::size_t fan_in(const LayerSpec& l) {
  return element_count(l.weight_shape) / (l.kind == LayerKind::Affine ? l.weight_shape[1]
                                                                      : l.weight_shape[0]);
}

// Per-example element count of the batch input, after validating its shape.
std::size_t check_batch(const Model& model, const RealArray& inputs) {
  const Shape& s = inputs.shape();
  const Shape& expect = model.input_shape();
  bool ok = s.size() >= 2;
  if (ok) {
    const Shape trailing(s.begin() + 1, s.end());
    ok = trailing == expect || (trailing.size() == 1 && trailing[0] == model.input_size());
  }
  if (!ok) {
    throw DimensionError("model expects [N x " + shape_string(expect) + "], got " +
                         shape_string(s));
  }
  return model.input_size();
}

}  // namespace

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::NN2: return "nn2";
    case Arch::NN3: return "nn3";
    case Arch::LeNet: return "lenet";
  }
  return "unknown";
}

Arch parse_arch(std::string_view text) {
  std::string t;
  for (char c : text) {
    if (c != '-' && c != '_') t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (t == "nn2") return Arch::NN2;
  if (t == "nn3") return Arch::NN3;
  if (t == "lenet") return Arch::LeNet;
  throw ConfigError("unknown architecture '" + std::string(text) + "' (expected nn2, nn3, lenet)");
}

ParamVector::ParamVector(std::shared_ptr<const ParamLayout> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  std::size_t total = 0;
  for (const auto& b : *layout_) total += element_count(b.shape);
  if (total != values_.size()) {
    throw DimensionError("parameter vector of " + std::to_string(values_.size()) +
                         " values does not match layout of " + std::to_string(total));
  }
}

RealArray ParamVector::block(std::size_t index) const {
  const auto& b = layout_->at(index);
  const auto first = values_.begin() + static_cast<std::ptrdiff_t>(b.offset);
  return RealArray(b.shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(element_count(b.shape))));
}

Model::Model(const Model& other)
    : arch_(other.arch_),
      input_shape_(other.input_shape_),
      num_classes_(other.num_classes_),
      layers_(other.layers_),
      layout_(other.layout_),
      params_(other.params_),
      id_(next_model_id()),
      version_(0) {}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    arch_ = other.arch_;
    input_shape_ = other.input_shape_;
    num_classes_ = other.num_classes_;
    layers_ = other.layers_;
    layout_ = other.layout_;
    params_ = other.params_;
    id_ = next_model_id();
    version_ = 0;
  }
  return *this;
}

std::span<double> Model::mutable_params() noexcept {
  ++version_;
  return params_;
}

RealArray Model::param(std::size_t block) const {
  const auto& b = layout_->at(block);
  const auto first = params_.begin() + static_cast<std::ptrdiff_t>(b.offset);
  return RealArray(b.shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(element_count(b.shape))));
}

void Model::set_param(std::size_t block, const RealArray& value) {
  const auto& b = layout_->at(block);
  if (value.shape() != b.shape) {
    throw DimensionError("parameter block " + std::to_string(block) + " has shape " +
                         shape_string(b.shape) + ", got " + shape_string(value.shape()));
  }
  ++version_;
  std::copy(value.values().begin(), value.values().end(),
            params_.begin() + static_cast<std::ptrdiff_t>(b.offset));
}

Model build_model(Arch arch, const Shape& input_shape, std::size_t num_classes,
                  std::uint64_t init_seed) {
  if (num_classes < 2) {
    throw ConfigError("a classifier needs at least 2 classes, got " + std::to_string(num_classes));
  }
  if (input_shape.empty() || element_count(input_shape) == 0 ||
      std::find(input_shape.begin(), input_shape.end(), 0u) != input_shape.end()) {
    throw DimensionError("unsupported input shape " + shape_string(input_shape));
  }

  StackBuilder b(input_shape);
  switch (arch) {
    case Arch::NN2:
    case Arch::NN3: {
      b.flatten();
      const int hidden = arch == Arch::NN2 ? 2 : 3;
      for (int i = 0; i < hidden; ++i) {
        b.affine(kHiddenWidth);
        b.relu();
      }
      b.affine(num_classes);
      break;
    }
    case Arch::LeNet: {
      if (input_shape.size() != 3) {
        throw DimensionError("LeNet needs a (C, H, W) input shape, got " +
                             shape_string(input_shape));
      }
      try {
        b.conv(6, 5, 2);
        b.relu();
        b.maxpool();
        b.conv(16, 5, 0);
        b.relu();
        b.maxpool();
      } catch (const GeometryError& e) {
        throw DimensionError("unsupported LeNet input shape " + shape_string(input_shape) +
                             ": " + e.what());
      }
      b.flatten();
      b.affine(120);
      b.relu();
      b.affine(num_classes);
      break;
    }
  }

  Model m;
  m.arch_ = arch;
  m.input_shape_ = input_shape;
  m.num_classes_ = num_classes;
  m.layers_ = std::move(b.layers);
  m.layout_ = std::make_shared<const ParamLayout>(std::move(b.layout));
  m.params_.assign(b.param_total, 0.0);
  m.id_ = next_model_id();

  // He-uniform: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), drawn layer by layer in
  // parameter order. Biases stay zero.
  Xoshiro256 rng(init_seed);
  for (const auto& l : m.layers_) {
    if (!l.has_params()) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in(l)));
    const std::size_t count = element_count(l.weight_shape);
    for (std::size_t i = 0; i < count; ++i) {
      m.params_[l.weight_offset + i] = (2.0 * rng.uniform01() - 1.0) * limit;
    }
  }
  return m;
}

RealArray forward(const Model& model, const RealArray& inputs) {
  ForwardCache scratch;
  return forward(model, inputs, scratch);
}

RealArray forward(const Model& model, const RealArray& inputs, ForwardCache& cache) {
  const std::size_t n = inputs.dim(0);
  check_batch(model, inputs);
  const auto& layers = model.layers();
  const double* p = model.params().data();

  cache.model_id_ = model.id();
  cache.model_version_ = model.version();
  cache.batch_ = n;
  cache.activations_.assign(layers.size() + 1, {});
  cache.pool_masks_.assign(layers.size(), {});
  cache.activations_[0].assign(inputs.values().begin(), inputs.values().end());

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::vector<double>& in = cache.activations_[i];
    std::vector<double>& out = cache.activations_[i + 1];
    out.resize(n * element_count(l.out_shape));
    switch (l.kind) {
      case LayerKind::Flatten:
        out = in;
        break;
      case LayerKind::Affine:
        nn::kernel::affine_forward(in.data(), p + l.weight_offset, p + l.bias_offset, n,
                                   l.weight_shape[0], l.weight_shape[1], out.data());
        break;
      case LayerKind::Conv: {
        const auto g = nn::kernel::ConvGeometry::make(n, l.in_shape[0], l.in_shape[1],
                                                      l.in_shape[2], l.weight_shape[0], l.ksize,
                                                      l.stride, l.pad);
        nn::kernel::conv2d_forward(g, in.data(), p + l.weight_offset, p + l.bias_offset,
                                   out.data());
        break;
      }
      case LayerKind::Relu:
        nn::kernel::relu_forward(out.size(), in.data(), out.data());
        break;
      case LayerKind::MaxPool:
        cache.pool_masks_[i].resize(out.size());
        nn::kernel::maxpool2x2_forward(n * l.in_shape[0], l.in_shape[1], l.in_shape[2],
                                       in.data(), out.data(), cache.pool_masks_[i].data());
        break;
    }
  }
  return RealArray({n, model.num_classes()}, cache.activations_.back());
}

ParamVector backward(const Model& model, const ForwardCache& cache, const RealArray& logit_grads) {
  if (cache.empty()) throw StateError("backward called without a forward cache");
  if (cache.model_id_ != model.id() || cache.model_version_ != model.version()) {
    throw StateError("forward cache is stale: model parameters changed after the forward pass");
  }
  const std::size_t n = cache.batch_;
  if (logit_grads.shape() != Shape{n, model.num_classes()}) {
    throw DimensionError("logit gradients " + shape_string(logit_grads.shape()) +
                         " do not match cached batch [" + std::to_string(n) + "x" +
                         std::to_string(model.num_classes()) + "]");
  }

  const auto& layers = model.layers();
  std::size_t first_param_layer = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) {
      first_param_layer = i;
      break;
    }
  }

  const double* p = model.params().data();
  std::vector<double> grads(model.param_count(), 0.0);
  std::vector<double> upstream(logit_grads.values().begin(), logit_grads.values().end());
  std::vector<double> downstream;

  for (std::size_t i = layers.size(); i-- > 0;) {
    if (i < first_param_layer) break;
    const LayerSpec& l = layers[i];
    const std::vector<double>& in = cache.activations_[i];
    const bool need_input_grad = i > first_param_layer;
    downstream.assign(need_input_grad ? in.size() : 0, 0.0);
    double* dx = need_input_grad ? downstream.data() : nullptr;
    switch (l.kind) {
      case LayerKind::Flatten:
        downstream = upstream;
        break;
      case LayerKind::Affine:
        nn::kernel::affine_backward(in.data(), p + l.weight_offset, upstream.data(), n,
                                    l.weight_shape[0], l.weight_shape[1],
                                    grads.data() + l.weight_offset, grads.data() + l.bias_offset,
                                    dx);
        break;
      case LayerKind::Conv: {
        const auto g = nn::kernel::ConvGeometry::make(n, l.in_shape[0], l.in_shape[1],
                                                      l.in_shape[2], l.weight_shape[0], l.ksize,
                                                      l.stride, l.pad);
        nn::kernel::conv2d_backward(g, in.data(), p + l.weight_offset, upstream.data(),
                                    grads.data() + l.weight_offset, grads.data() + l.bias_offset,
                                    dx);
        break;
      }
      case LayerKind::Relu:
        if (dx) nn::kernel::relu_backward(in.size(), in.data(), upstream.data(), dx);
        break;
      case LayerKind::MaxPool:
        if (dx) {
          nn::kernel::maxpool2x2_backward(upstream.size(), cache.pool_masks_[i].data(),
                                          upstream.data(), dx, in.size());
        }
        break;
    }
    std::swap(upstream, downstream);
  }
  return ParamVector(model.layout(), std::move(grads));
}

ParamVector flatten(const Model& model) {
  return ParamVector(model.layout(), std::vector<double>(model.params().begin(), model.params().end()));
}

void unflatten(Model& model, const ParamVector& params) {
  if (params.layout() != *model.layout() || params.size() != model.param_count()) {
    throw DimensionError("parameter vector layout does not match the model");
  }
  auto dst = model.mutable_params();
  std::copy(params.values().begin(), params.values().end(), dst.begin());
}

}  // namespace trimsgd
