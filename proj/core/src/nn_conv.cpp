#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "trimsgd/error.hpp"
#include "trimsgd/nn.hpp"

namespace trimsgd::nn {
namespace kernel {

namespace {

using Index = std::ptrdiff_t;

// Output columns ox for which ix = ox*stride + kx - pad lands inside [0, width).
struct ColumnRange {
  std::size_t lo, hi;
};

ColumnRange valid_columns(const ConvGeometry& g, std::size_t kx) {
  const Index s = static_cast<Index>(g.stride);
  const Index shift = static_cast<Index>(kx) - static_cast<Index>(g.pad);
  Index lo = 0;
  if (shift < 0) lo = (-shift + s - 1) / s;
  const Index last_ix = static_cast<Index>(g.width) - 1 - shift;
  Index hi = last_ix < 0 ? 0 : last_ix / s + 1;
  hi = std::min<Index>(hi, static_cast<Index>(g.out_width));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

ConvGeometry ConvGeometry::make(std::size_t batch, std::size_t channels, std::size_t height,
                                std::size_t width, std::size_t filters, std::size_t ksize,
                                std::size_t stride, std::size_t pad) {
  auto fail = [&] {
    throw GeometryError("conv2d geometry does not tile: H=" + std::to_string(height) +
                        " W=" + std::to_string(width) + " k=" + std::to_string(ksize) +
                        " stride=" + std::to_string(stride) + " pad=" + std::to_string(pad));
  };
  if (stride == 0 || ksize == 0) fail();
  if (height + 2 * pad < ksize || width + 2 * pad < ksize) fail();
  if ((height + 2 * pad - ksize) % stride != 0 || (width + 2 * pad - ksize) % stride != 0) fail();
  ConvGeometry g;
  g.batch = batch;
  g.channels = channels;
  g.height = height;
  g.width = width;
  g.filters = filters;
  g.ksize = ksize;
  g.stride = stride;
  g.pad = pad;
  g.out_height = (height + 2 * pad - ksize) / stride + 1;
  g.out_width = (width + 2 * pad - ksize) / stride + 1;
  return g;
}

// Each output accumulates over (c, ky, kx) in ascending order, skipping
// padded positions, and adds the bias last. The row buffer only reorders the
// loops, never the per-element summation.
void conv2d_forward(const ConvGeometry& g, const double* x, const double* kernels,
                    const double* bias, double* out) {
  const std::size_t k = g.ksize;
  std::vector<double> acc(g.out_width);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t f = 0; f < g.filters; ++f) {
      for (std::size_t oy = 0; oy < g.out_height; ++oy) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t c = 0; c < g.channels; ++c) {
          const double* xplane = x + (n * g.channels + c) * g.height * g.width;
          const double* kplane = kernels + (f * g.channels + c) * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const Index iy = static_cast<Index>(oy * g.stride + ky) - static_cast<Index>(g.pad);
            if (iy < 0 || iy >= static_cast<Index>(g.height)) continue;
            const double* xrow = xplane + static_cast<std::size_t>(iy) * g.width;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const double kv = kplane[ky * k + kx];
              const auto [lo, hi] = valid_columns(g, kx);
              if (lo >= hi) continue;
              // First valid input column; later ones advance by the stride.
              const double* src = xrow + (lo * g.stride + kx - g.pad);
              if (g.stride == 1) {
                for (std::size_t ox = lo; ox < hi; ++ox) acc[ox] += src[ox - lo] * kv;
              } else {
                for (std::size_t ox = lo; ox < hi; ++ox) acc[ox] += src[(ox - lo) * g.stride] * kv;
              }
            }
          }
        }
        double* orow = out + ((n * g.filters + f) * g.out_height + oy) * g.out_width;
        for (std::size_t ox = 0; ox < g.out_width; ++ox) orow[ox] = acc[ox] + bias[f];
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const double* x, const double* kernels,
                     const double* up, double* dk, double* db, double* dx) {
  const std::size_t k = g.ksize;
  std::fill(dk, dk + g.filters * g.channels * k * k, 0.0);
  std::fill(db, db + g.filters, 0.0);
  if (dx != nullptr) std::fill(dx, dx + g.batch * g.channels * g.height * g.width, 0.0);

  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t f = 0; f < g.filters; ++f) {
      const double* uplane = up + (n * g.filters + f) * g.out_height * g.out_width;
      for (std::size_t oy = 0; oy < g.out_height; ++oy) {
        for (std::size_t ox = 0; ox < g.out_width; ++ox) {
          const double u = uplane[oy * g.out_width + ox];
          db[f] += u;
          if (u == 0.0) continue;
          for (std::size_t c = 0; c < g.channels; ++c) {
            const std::size_t plane = (n * g.channels + c) * g.height * g.width;
            const std::size_t kbase = (f * g.channels + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const Index iy = static_cast<Index>(oy * g.stride + ky) - static_cast<Index>(g.pad);
              if (iy < 0 || iy >= static_cast<Index>(g.height)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const Index ix =
                    static_cast<Index>(ox * g.stride + kx) - static_cast<Index>(g.pad);
                if (ix < 0 || ix >= static_cast<Index>(g.width)) continue;
                const std::size_t xi =
                    plane + static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix);
                dk[kbase + ky * k + kx] += u * x[xi];
                if (dx != nullptr) dx[xi] += u * kernels[kbase + ky * k + kx];
              }
            }
          }
        }
      }
    }
  }
}

void maxpool2x2_forward(std::size_t planes, std::size_t height, std::size_t width,
                        const double* x, double* out, std::uint32_t* argmax) {
  const std::size_t oh = height / 2, ow = width / 2;
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * height * width;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t top = base + 2 * oy * width + 2 * ox;
        const std::size_t cand[4] = {top, top + 1, top + width, top + width + 1};
        std::size_t best = cand[0];
        for (std::size_t i = 1; i < 4; ++i) {
          if (x[cand[i]] > x[best]) best = cand[i];
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = x[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool2x2_backward(std::size_t out_count, const std::uint32_t* argmax, const double* up,
                         double* dx, std::size_t input_count) {
  std::fill(dx, dx + input_count, 0.0);
  for (std::size_t o = 0; o < out_count; ++o) dx[argmax[o]] += up[o];
}

}  // namespace kernel

namespace {

kernel::ConvGeometry conv_geometry(const RealArray& x, const RealArray& kernels,
                                   std::size_t stride, std::size_t pad, const char* op) {
  if (x.rank() != 4 || kernels.rank() != 4 || kernels.dim(1) != x.dim(1) ||
      kernels.dim(2) != kernels.dim(3)) {
    throw DimensionError(std::string(op) + ": x " + shape_string(x.shape()) + ", kernels " +
                         shape_string(kernels.shape()));
  }
  return kernel::ConvGeometry::make(x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernels.dim(0),
                                    kernels.dim(2), stride, pad);
}

}  // namespace

RealArray conv2d_forward(const RealArray& x, const RealArray& kernels, const RealArray& bias,
                         std::size_t stride, std::size_t pad) {
  const auto g = conv_geometry(x, kernels, stride, pad, "conv2d_forward");
  if (bias.rank() != 1 || bias.dim(0) != g.filters) {
    throw DimensionError("conv2d_forward: bias " + shape_string(bias.shape()) + " for " +
                         std::to_string(g.filters) + " filters");
  }
  RealArray out({g.batch, g.filters, g.out_height, g.out_width});
  kernel::conv2d_forward(g, x.data(), kernels.data(), bias.data(), out.data());
  return out;
}

LayerGrad conv2d_backward(const RealArray& x, const RealArray& kernels, const RealArray& upstream,
                          std::size_t stride, std::size_t pad) {
  const auto g = conv_geometry(x, kernels, stride, pad, "conv2d_backward");
  const Shape expected{g.batch, g.filters, g.out_height, g.out_width};
  if (upstream.shape() != expected) {
    throw DimensionError("conv2d_backward: upstream " + shape_string(upstream.shape()) +
                         ", expected " + shape_string(expected));
  }
  LayerGrad grad;
  grad.param_grads.emplace_back(kernels.shape());
  grad.param_grads.emplace_back(Shape{g.filters});
  grad.input_grad = RealArray(x.shape());
  kernel::conv2d_backward(g, x.data(), kernels.data(), upstream.data(), grad.param_grads[0].data(),
                          grad.param_grads[1].data(), grad.input_grad.data());
  return grad;
}

PoolResult maxpool2x2_forward(const RealArray& x) {
  if (x.rank() != 4) {
    throw DimensionError("maxpool2x2_forward expects [N x C x H x W], got " +
                         shape_string(x.shape()));
  }
  const std::size_t h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw GeometryError("maxpool2x2 needs even spatial extents, got H=" + std::to_string(h) +
                        " W=" + std::to_string(w));
  }
  PoolResult result;
  result.pooled = RealArray({x.dim(0), x.dim(1), h / 2, w / 2});
  result.mask.input_shape = x.shape();
  result.mask.argmax.resize(result.pooled.size());
  kernel::maxpool2x2_forward(x.dim(0) * x.dim(1), h, w, x.data(), result.pooled.data(),
                             result.mask.argmax.data());
  return result;
}

RealArray maxpool2x2_backward(const PoolMask& mask, const RealArray& upstream) {
  if (upstream.size() != mask.argmax.size()) {
    throw DimensionError("maxpool2x2_backward: upstream " + shape_string(upstream.shape()) +
                         " does not match " + std::to_string(mask.argmax.size()) +
                         " pooled outputs");
  }
  RealArray dx(mask.input_shape);
  kernel::maxpool2x2_backward(mask.argmax.size(), mask.argmax.data(), upstream.data(), dx.data(),
                              dx.size());
  return dx;
}

}  // namespace trimsgd::nn
