#pragma once

// Complex 2-D convolution (cross-correlation, stride 1, no padding) on CHW
// tensors, its adjoint, and the kernel gradient.
//
// Kernel layout: [out_channel][in_channel][kernel_h][kernel_w].
//   y[o, i, j] = sum_{c,u,v} K[o, c, u, v] * x[c, i + u, j + v]

#include <complex>
#include <cstddef>
#include <span>
#include <string>

#include "cvnn/complex_linalg.hpp"
#include "cvnn/errors.hpp"

namespace cvnn {

struct Shape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

struct ConvGeometry {
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  std::size_t kernel_size() const noexcept {
    return out_channels * in_channels * kernel_h * kernel_w;
  }
  Shape output_shape(const Shape& in) const {
    if (in.channels != in_channels || in.height < kernel_h || in.width < kernel_w) {
      throw ShapeError("conv " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                       " with " + std::to_string(in_channels) +
                       " input channels cannot consume " + to_string(in));
    }
    return {out_channels, in.height - kernel_h + 1, in.width - kernel_w + 1};
  }
  bool operator==(const ConvGeometry&) const = default;
};

/// y = conv(K, x); y is overwritten.
inline void conv_forward(const ConvGeometry& g, const Shape& in, std::span<const Complex> kernel,
                         std::span<const Complex> x, std::span<Complex> y) {
  const Shape out = g.output_shape(in);
  std::fill(y.begin(), y.end(), Complex{});
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    Complex* yo = y.data() + o * out.height * out.width;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const Complex* xc = x.data() + c * in.height * in.width;
      const Complex* kc = kernel.data() + (o * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t u = 0; u < g.kernel_h; ++u) {
        for (std::size_t v = 0; v < g.kernel_w; ++v) {
          const Complex k = kc[u * g.kernel_w + v];
          for (std::size_t i = 0; i < out.height; ++i) {
            Complex* yrow = yo + i * out.width;
            const Complex* xrow = xc + (i + u) * in.width + v;
            for (std::size_t j = 0; j < out.width; ++j) yrow[j] += k * xrow[j];
          }
        }
      }
    }
  }
}

/// gx += conv^H(gy): correlation of gy with the conjugated, transposed kernel.
inline void conv_adjoint_accumulate(const ConvGeometry& g, const Shape& in,
                                    std::span<const Complex> kernel,
                                    std::span<const Complex> gy, std::span<Complex> gx) {
  const Shape out = g.output_shape(in);
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    const Complex* go = gy.data() + o * out.height * out.width;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      Complex* xc = gx.data() + c * in.height * in.width;
      const Complex* kc = kernel.data() + (o * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t u = 0; u < g.kernel_h; ++u) {
        for (std::size_t v = 0; v < g.kernel_w; ++v) {
          const Complex k = std::conj(kc[u * g.kernel_w + v]);
          for (std::size_t i = 0; i < out.height; ++i) {
            const Complex* grow = go + i * out.width;
            Complex* xrow = xc + (i + u) * in.width + v;
            for (std::size_t j = 0; j < out.width; ++j) xrow[j] += k * grow[j];
          }
        }
      }
    }
  }
}

/// gk += dL/dK given upstream gy (dL/dRe + i dL/dIm) and the layer input x.
inline void conv_kernel_grad_accumulate(const ConvGeometry& g, const Shape& in,
                                        std::span<const Complex> x, std::span<const Complex> gy,
                                        std::span<Complex> gk) {
  const Shape out = g.output_shape(in);
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    const Complex* go = gy.data() + o * out.height * out.width;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const Complex* xc = x.data() + c * in.height * in.width;
      Complex* kc = gk.data() + (o * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t u = 0; u < g.kernel_h; ++u) {
        for (std::size_t v = 0; v < g.kernel_w; ++v) {
          Complex acc{};
          for (std::size_t i = 0; i < out.height; ++i) {
            const Complex* grow = go + i * out.width;
            const Complex* xrow = xc + (i + u) * in.width + v;
            for (std::size_t j = 0; j < out.width; ++j) acc += grow[j] * std::conj(xrow[j]);
          }
          kc[u * g.kernel_w + v] += acc;
        }
      }
    }
  }
}

}  // namespace cvnn
