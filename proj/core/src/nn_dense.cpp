#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>
#include <string>

#include "trimsgd/error.hpp"
#include "trimsgd/nn.hpp"

namespace trimsgd::nn {
namespace kernel {

namespace {

// GCC/Clang vector extension; the compiler lowers it to whatever SIMD width
// the target has, and each lane still rounds like scalar code.
using Vec = double __attribute__((vector_size(64)));
constexpr std::size_t kLanes = sizeof(Vec) / sizeof(double);

inline Vec load(const double* p) {
  Vec v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store(double* p, Vec v) { std::memcpy(p, &v, sizeof v); }

constexpr std::size_t kRowTile = 6;
constexpr std::size_t kVecTile = 4;  // vectors per column tile
constexpr std::size_t kDepthBlock = 256;

// out[r0..r0+R, c0..c0+NV*kLanes] over depth [j0, j1). Partial sums live in
// `out` between depth blocks, so every element is still accumulated over j
// in ascending order; the bias is added once the last block is done.
template <std::size_t R, std::size_t NV>
inline void gemm_tile(const double* a, const double* b, std::size_t p, std::size_t k,
                      std::size_t j0, std::size_t j1, std::size_t r0, std::size_t c0,
                      double* out, bool first, const double* bias) {
  Vec acc[R][NV];
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t v = 0; v < NV; ++v) {
      acc[r][v] = first ? Vec{} : load(out + (r0 + r) * k + c0 + v * kLanes);
    }
  }
  for (std::size_t j = j0; j < j1; ++j) {
    const double* brow = b + j * k + c0;
    Vec bv[NV];
    for (std::size_t v = 0; v < NV; ++v) bv[v] = load(brow + v * kLanes);
    for (std::size_t r = 0; r < R; ++r) {
      const Vec av = Vec{} + a[(r0 + r) * p + j];
      for (std::size_t v = 0; v < NV; ++v) acc[r][v] += av * bv[v];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t v = 0; v < NV; ++v) {
      Vec o = acc[r][v];
      if (bias) o += load(bias + c0 + v * kLanes);
      store(out + (r0 + r) * k + c0 + v * kLanes, o);
    }
  }
}

template <std::size_t NV>
inline void gemm_column_panel(const double* a, const double* b, std::size_t m, std::size_t p,
                              std::size_t k, std::size_t j0, std::size_t j1, std::size_t c0,
                              double* out, bool first, const double* bias) {
  const std::size_t m_full = m - m % kRowTile;
  for (std::size_t r0 = 0; r0 < m_full; r0 += kRowTile) {
    gemm_tile<kRowTile, NV>(a, b, p, k, j0, j1, r0, c0, out, first, bias);
  }
  for (std::size_t r = m_full; r < m; ++r) {
    gemm_tile<1, NV>(a, b, p, k, j0, j1, r, c0, out, first, bias);
  }
}

// out[m x k] = a[m x p] * b[p x k] (+ bias[k]). Each element is the sum over
// j = 0..p-1 in ascending order, with the bias added last, which is exactly
// what a naive triple loop computes.
void gemm(const double* a, const double* b, const double* bias, std::size_t m, std::size_t p,
          std::size_t k, double* out) {
  if (p == 0) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < k; ++c) out[r * k + c] = bias ? 0.0 + bias[c] : 0.0;
    }
    return;
  }
  constexpr std::size_t wide = kVecTile * kLanes;
  const std::size_t k_wide = k - k % wide;
  const std::size_t k_vec = k - k % kLanes;
  for (std::size_t j0 = 0; j0 < p; j0 += kDepthBlock) {
    const std::size_t j1 = std::min(p, j0 + kDepthBlock);
    const bool first = j0 == 0;
    const double* b_last = j1 == p ? bias : nullptr;
    for (std::size_t c0 = 0; c0 < k_wide; c0 += wide) {
      gemm_column_panel<kVecTile>(a, b, m, p, k, j0, j1, c0, out, first, b_last);
    }
    for (std::size_t c0 = k_wide; c0 < k_vec; c0 += kLanes) {
      gemm_column_panel<1>(a, b, m, p, k, j0, j1, c0, out, first, b_last);
    }
    for (std::size_t r = 0; r < m && k_vec < k; ++r) {
      for (std::size_t c = k_vec; c < k; ++c) {
        double s = first ? 0.0 : out[r * k + c];
        for (std::size_t j = j0; j < j1; ++j) s += a[r * p + j] * b[j * k + c];
        out[r * k + c] = b_last ? s + b_last[c] : s;
      }
    }
  }
}

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::size_t i1 = std::min(rows, i0 + kBlock), j1 = std::min(cols, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
      }
    }
  }
}

}  // namespace

void affine_forward(const double* x, const double* w, const double* b, std::size_t n,
                    std::size_t d, std::size_t k, double* out) {
  gemm(x, w, b, n, d, k, out);
}

void affine_backward(const double* x, const double* w, const double* up, std::size_t n,
                     std::size_t d, std::size_t k, double* dw, double* db, double* dx) {
  std::fill(db, db + k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* u = up + r * k;
    for (std::size_t c = 0; c < k; ++c) db[c] += u[c];
  }

  thread_local std::vector<double> scratch;
  scratch.resize(std::max(n * d, d * k));

  // dW = x^T up, summed over the batch in ascending row order.
  transpose(x, n, d, scratch.data());
  gemm(scratch.data(), up, nullptr, d, n, k, dw);

  if (dx == nullptr) return;
  // dx = up W^T, summed over output units in ascending order.
  transpose(w, d, k, scratch.data());
  gemm(up, scratch.data(), nullptr, n, k, d, dx);
}

void relu_forward(std::size_t count, const double* x, double* out) {
  for (std::size_t i = 0; i < count; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::size_t count, const double* x, const double* up, double* dx) {
  for (std::size_t i = 0; i < count; ++i) dx[i] = x[i] > 0.0 ? up[i] : 0.0;
}

void softmax_cross_entropy(const double* logits, std::size_t n, std::size_t l,
                           const ClassLabel* labels, double* loss, double* grad) {
  for (std::size_t r = 0; r < n; ++r) {
    const ClassLabel y = labels[r];
    if (y < 1 || static_cast<std::size_t>(y) > l) {
      throw LabelError("label " + std::to_string(y) + " at example " + std::to_string(r) +
                       " is outside {1.." + std::to_string(l) + "}");
    }
    const double* z = logits + r * l;
    double* g = grad + r * l;
    const double m = *std::max_element(z, z + l);
    double s = 0.0;
    for (std::size_t c = 0; c < l; ++c) {
      g[c] = std::exp(z[c] - m);
      s += g[c];
    }
    const auto target = static_cast<std::size_t>(y - 1);
    // log(s) >= 0 and m - z_y >= 0, so the loss is non-negative by construction.
    loss[r] = std::log(s) + (m - z[target]);
    const double inv = 1.0 / s;
    for (std::size_t c = 0; c < l; ++c) g[c] *= inv;
    g[target] -= 1.0;
  }
}

}  // namespace kernel

RealArray affine_forward(const RealArray& x, const RealArray& weights, const RealArray& bias) {
  if (x.rank() != 2 || weights.rank() != 2 || bias.rank() != 1 ||
      x.dim(1) != weights.dim(0) || bias.dim(0) != weights.dim(1)) {
    throw DimensionError("affine_forward: x " + shape_string(x.shape()) + ", W " +
                         shape_string(weights.shape()) + ", b " + shape_string(bias.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1), k = weights.dim(1);
  RealArray out({n, k});
  kernel::affine_forward(x.data(), weights.data(), bias.data(), n, d, k, out.data());
  return out;
}

LayerGrad affine_backward(const RealArray& x, const RealArray& weights,
                          const RealArray& upstream) {
  if (x.rank() != 2 || weights.rank() != 2 || upstream.rank() != 2 ||
      x.dim(1) != weights.dim(0) || upstream.dim(0) != x.dim(0) ||
      upstream.dim(1) != weights.dim(1)) {
    throw DimensionError("affine_backward: x " + shape_string(x.shape()) + ", W " +
                         shape_string(weights.shape()) + ", upstream " +
                         shape_string(upstream.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1), k = weights.dim(1);
  LayerGrad g;
  g.param_grads.emplace_back(Shape{d, k});
  g.param_grads.emplace_back(Shape{k});
  g.input_grad = RealArray({n, d});
  kernel::affine_backward(x.data(), weights.data(), upstream.data(), n, d, k,
                          g.param_grads[0].data(), g.param_grads[1].data(), g.input_grad.data());
  return g;
}

RealArray relu_forward(const RealArray& x) {
  RealArray out(x.shape());
  kernel::relu_forward(x.size(), x.data(), out.data());
  return out;
}

RealArray relu_backward(const RealArray& x, const RealArray& upstream) {
  if (x.shape() != upstream.shape()) {
    throw DimensionError("relu_backward: x " + shape_string(x.shape()) + ", upstream " +
                         shape_string(upstream.shape()));
  }
  RealArray dx(x.shape());
  kernel::relu_backward(x.size(), x.data(), upstream.data(), dx.data());
  return dx;
}

SoftmaxCrossEntropy softmax_cross_entropy(const RealArray& logits,
                                          std::span<const ClassLabel> labels) {
  if (logits.rank() != 2 || labels.size() != logits.dim(0)) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_string(logits.shape()) +
                         " with " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), l = logits.dim(1);
  SoftmaxCrossEntropy result;
  result.loss.values.resize(n);
  result.logit_grads = RealArray(logits.shape());
  kernel::softmax_cross_entropy(logits.data(), n, l, labels.data(), result.loss.values.data(),
                                result.logit_grads.data());
  return result;
}

}  // namespace trimsgd::nn
