#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trimsgd/real_array.hpp"

namespace trimsgd {

/// Class identifier in {1..L}.
using ClassLabel = std::int32_t;

namespace nn {

/// Gradients of one layer application.
///
/// `param_grads` follows the parameter order of the layer (weights, then
/// bias) and each entry has exactly the shape of its parameter.
struct LayerGrad {
  std::vector<RealArray> param_grads;
  RealArray input_grad;
};

/// Per-example loss in nats, one value per batch row, each >= 0.
struct PerExampleLoss {
  std::vector<double> values;
};

struct SoftmaxCrossEntropy {
  PerExampleLoss loss;
  RealArray logit_grads;  // softmax - onehot, NOT divided by batch size
};

/// Argmax positions recorded by a 2x2 max-pool, used to route gradients.
struct PoolMask {
  Shape input_shape;
  std::vector<std::uint32_t> argmax;  // flat input index for each output element
};

struct PoolResult {
  RealArray pooled;
  PoolMask mask;
};

// x [N x D], W [D x K], b [K] -> [N x K]
RealArray affine_forward(const RealArray& x, const RealArray& weights, const RealArray& bias);
// param_grads = {dW [D x K], db [K]}, input_grad = dx [N x D]
LayerGrad affine_backward(const RealArray& x, const RealArray& weights, const RealArray& upstream);

// Cross-correlation with zero padding. x [N x C x H x W], kernels [F x C x k x k], bias [F].
RealArray conv2d_forward(const RealArray& x, const RealArray& kernels, const RealArray& bias,
                         std::size_t stride, std::size_t pad);
LayerGrad conv2d_backward(const RealArray& x, const RealArray& kernels, const RealArray& upstream,
                          std::size_t stride, std::size_t pad);

/// Non-overlapping 2x2 max over the two trailing axes of [N x C x H x W].
/// Ties go to the first element of the window in row-major order.
PoolResult maxpool2x2_forward(const RealArray& x);
RealArray maxpool2x2_backward(const PoolMask& mask, const RealArray& upstream);

RealArray relu_forward(const RealArray& x);
// Passes upstream where x > 0; the subgradient at 0 is 0.
RealArray relu_backward(const RealArray& x, const RealArray& upstream);

/// Numerically stable softmax cross-entropy on logits [N x L].
/// Labels are 1-based; any label outside {1..L} raises LabelError.
SoftmaxCrossEntropy softmax_cross_entropy(const RealArray& logits,
                                          std::span<const ClassLabel> labels);

/// Raw-pointer kernels behind the RealArray operations. The model runs these
/// directly on its flat parameter buffer.
///
/// Every reduction has a fixed accumulation order (ascending over the
/// summed index) so results do not depend on tiling or batch composition.
namespace kernel {

void affine_forward(const double* x, const double* w, const double* b, std::size_t n,
                    std::size_t d, std::size_t k, double* out);

// Overwrites dw and db. dx may be null when the input gradient is not needed.
void affine_backward(const double* x, const double* w, const double* up, std::size_t n,
                     std::size_t d, std::size_t k, double* dw, double* db, double* dx);

struct ConvGeometry {
  std::size_t batch = 0, channels = 0, height = 0, width = 0;
  std::size_t filters = 0, ksize = 0, stride = 1, pad = 0;
  std::size_t out_height = 0, out_width = 0;

  // Throws GeometryError unless the window tiles the padded input exactly.
  static ConvGeometry make(std::size_t batch, std::size_t channels, std::size_t height,
                           std::size_t width, std::size_t filters, std::size_t ksize,
                           std::size_t stride, std::size_t pad);
};

void conv2d_forward(const ConvGeometry& g, const double* x, const double* kernels,
                    const double* bias, double* out);
// Overwrites dk and db. dx may be null.
void conv2d_backward(const ConvGeometry& g, const double* x, const double* kernels,
                     const double* up, double* dk, double* db, double* dx);

void maxpool2x2_forward(std::size_t planes, std::size_t height, std::size_t width,
                        const double* x, double* out, std::uint32_t* argmax);
// Overwrites dx (input_count elements).
void maxpool2x2_backward(std::size_t out_count, const std::uint32_t* argmax, const double* up,
                         double* dx, std::size_t input_count);

void relu_forward(std::size_t count, const double* x, double* out);
void relu_backward(std::size_t count, const double* x, const double* up, double* dx);

// Fills loss[n] and grad[n x l]; labels are 1-based.
void softmax_cross_entropy(const double* logits, std::size_t n, std::size_t l,
                           const ClassLabel* labels, double* loss, double* grad);

}  // namespace kernel
}  // namespace nn
}  // namespace trimsgd
