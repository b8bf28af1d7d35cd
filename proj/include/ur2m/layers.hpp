// Copyright 2026 The UR2M Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Forward and backward kernels for the small layer set used by the cascade
// backbone, the evidence heads and the softmax baselines. Backward functions
// accumulate into parameter gradients and return the input gradient.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "ur2m/tensor.hpp"

namespace ur2m::nn {

enum class Padding { kSame, kValid };

namespace detail {

struct ConvGeometry {
  std::size_t in_channels, height, width;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t groups, in_per_group, out_per_group;
  std::size_t out_h, out_w;
  std::ptrdiff_t pad_h, pad_w;
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight,
                           std::size_t groups, Padding padding) {
  expect_rank(input.shape(), 3, "conv2d input");
  expect_rank(weight.shape(), 4, "conv2d weight");
  ConvGeometry g{};
  g.in_channels = input.dim(0);
  g.height = input.dim(1);
  g.width = input.dim(2);
  g.out_channels = weight.dim(0);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.groups = groups;
  if (groups == 0 || g.in_channels % groups != 0) {
    throw DimensionError("conv2d: axis 0 of input (" +
                         std::to_string(g.in_channels) +
                         ") not divisible by groups " + std::to_string(groups));
  }
  if (g.out_channels % groups != 0) {
    throw DimensionError("conv2d: axis 0 of weight (" +
                         std::to_string(g.out_channels) +
                         ") not divisible by groups " + std::to_string(groups));
  }
  g.in_per_group = g.in_channels / groups;
  g.out_per_group = g.out_channels / groups;
  if (weight.dim(1) != g.in_per_group) {
    throw DimensionError("conv2d: axis 1 of weight is " +
                         std::to_string(weight.dim(1)) + ", expected C_in/groups = " +
                         std::to_string(g.in_per_group));
  }
  if (padding == Padding::kSame) {
    if (g.kernel_h % 2 == 0 || g.kernel_w % 2 == 0) {
      throw DimensionError("conv2d: same padding needs odd kernel, got " +
                           shape_str(weight.shape()));
    }
    g.pad_h = static_cast<std::ptrdiff_t>(g.kernel_h / 2);
    g.pad_w = static_cast<std::ptrdiff_t>(g.kernel_w / 2);
    g.out_h = g.height;
    g.out_w = g.width;
  } else {
    if (g.kernel_h > g.height || g.kernel_w > g.width) {
      throw DimensionError("conv2d: kernel " + shape_str(weight.shape()) +
                           " larger than input " + shape_str(input.shape()));
    }
    g.pad_h = g.pad_w = 0;
    g.out_h = g.height - g.kernel_h + 1;
    g.out_w = g.width - g.kernel_w + 1;
  }
  return g;
}

// Range of output positions o such that o + k - pad lies in [0, extent).
inline void valid_range(std::ptrdiff_t k, std::ptrdiff_t pad,
                        std::ptrdiff_t extent, std::ptrdiff_t out_extent,
                        std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
  const std::ptrdiff_t shift = k - pad;
  lo = std::max<std::ptrdiff_t>(0, -shift);
  hi = std::min<std::ptrdiff_t>(out_extent, extent - shift);
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, std::size_t groups, Padding padding) {
  const auto g = detail::conv_geometry(input, weight, groups, padding);
  if (!bias.empty() && bias.size() != g.out_channels) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) +
                         " vs C_out " + std::to_string(g.out_channels));
  }
  Tensor<T> out({g.out_channels, g.out_h, g.out_w});
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t in_plane = g.height * g.width;
  const T* in = input.data().data();
  const T* w = weight.data().data();
  T* o = out.data().data();

  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    T* dst = o + oc * plane;
    if (!bias.empty()) std::fill(dst, dst + plane, bias[oc]);
    const std::size_t group = oc / g.out_per_group;
    for (std::size_t icg = 0; icg < g.in_per_group; ++icg) {
      const std::size_t ic = group * g.in_per_group + icg;
      const T* src = in + ic * in_plane;
      const T* wk = w + (oc * g.in_per_group + icg) * g.kernel_h * g.kernel_w;
      if (g.kernel_h == 1 && g.kernel_w == 1 && g.pad_h == 0) {
        const T wv = wk[0];
        for (std::size_t p = 0; p < plane; ++p) dst[p] += wv * src[p];
        continue;
      }
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        std::ptrdiff_t y0, y1;
        detail::valid_range(static_cast<std::ptrdiff_t>(ky), g.pad_h,
                            static_cast<std::ptrdiff_t>(g.height),
                            static_cast<std::ptrdiff_t>(g.out_h), y0, y1);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          std::ptrdiff_t x0, x1;
          detail::valid_range(static_cast<std::ptrdiff_t>(kx), g.pad_w,
                              static_cast<std::ptrdiff_t>(g.width),
                              static_cast<std::ptrdiff_t>(g.out_w), x0, x1);
          const T wv = wk[ky * g.kernel_w + kx];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - g.pad_h;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - g.pad_w;
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            T* drow = dst + y * static_cast<std::ptrdiff_t>(g.out_w);
            const T* srow = src + (y + dy) * static_cast<std::ptrdiff_t>(g.width) + dx;
            for (std::ptrdiff_t x = x0; x < x1; ++x) drow[x] += wv * srow[x];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates dL/dweight and dL/dbias (when tracked) and returns dL/dinput.
// Pass need_input_grad=false for the first layer to skip that work.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& input, Tensor<T>& weight,
                          Tensor<T>& bias, std::size_t groups, Padding padding,
                          const Tensor<T>& grad_out, bool need_input_grad = true) {
  const auto g = detail::conv_geometry(input, weight, groups, padding);
  if (grad_out.shape() != Shape{g.out_channels, g.out_h, g.out_w}) {
    throw DimensionError("conv2d_backward: grad shape " +
                         shape_str(grad_out.shape()));
  }
  Tensor<T> grad_in;
  if (need_input_grad) grad_in = Tensor<T>(input.shape());
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t in_plane = g.height * g.width;
  const T* in = input.data().data();
  const T* w = weight.data().data();
  const T* go = grad_out.data().data();
  T* gw = weight.requires_grad() ? weight.grad().data() : nullptr;
  T* gi = need_input_grad ? grad_in.data().data() : nullptr;

  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    const T* gsrc = go + oc * plane;
    if (!bias.empty() && bias.requires_grad()) {
      T acc = 0;
      for (std::size_t p = 0; p < plane; ++p) acc += gsrc[p];
      bias.grad()[oc] += acc;
    }
    const std::size_t group = oc / g.out_per_group;
    for (std::size_t icg = 0; icg < g.in_per_group; ++icg) {
      const std::size_t ic = group * g.in_per_group + icg;
      const T* src = in + ic * in_plane;
      T* gdst = gi ? gi + ic * in_plane : nullptr;
      const std::size_t widx = (oc * g.in_per_group + icg) * g.kernel_h * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        std::ptrdiff_t y0, y1;
        detail::valid_range(static_cast<std::ptrdiff_t>(ky), g.pad_h,
                            static_cast<std::ptrdiff_t>(g.height),
                            static_cast<std::ptrdiff_t>(g.out_h), y0, y1);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          std::ptrdiff_t x0, x1;
          detail::valid_range(static_cast<std::ptrdiff_t>(kx), g.pad_w,
                              static_cast<std::ptrdiff_t>(g.width),
                              static_cast<std::ptrdiff_t>(g.out_w), x0, x1);
          const std::size_t k = widx + ky * g.kernel_w + kx;
          const T wv = w[k];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - g.pad_h;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - g.pad_w;
          T acc = 0;
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            const T* grow = gsrc + y * static_cast<std::ptrdiff_t>(g.out_w);
            const std::ptrdiff_t off = (y + dy) * static_cast<std::ptrdiff_t>(g.width) + dx;
            const T* srow = src + off;
            for (std::ptrdiff_t x = x0; x < x1; ++x) acc += grow[x] * srow[x];
            if (gdst) {
              T* girow = gdst + off;
              for (std::ptrdiff_t x = x0; x < x1; ++x) girow[x] += wv * grow[x];
            }
          }
          if (gw) gw[k] += acc;
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  for (auto& v : x.data()) v = v > T(0) ? v : T(0);
  return x;
}

// Gradient of relu given its output (y > 0 exactly where x > 0).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, Tensor<T> grad) {
  if (y.shape() != grad.shape()) {
    throw DimensionError("relu_backward: " + shape_str(y.shape()) + " vs " +
                         shape_str(grad.shape()));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(y[i] > T(0))) grad[i] = T(0);
  }
  return grad;
}

// Adaptive average pooling of a C x H x W map to a length-C vector.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  expect_rank(x.shape(), 3, "global_avg_pool");
  const std::size_t plane = x.dim(1) * x.dim(2);
  if (plane == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  Tensor<T> out({x.dim(0)});
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    const T* src = x.data().data() + c * plane;
    T acc = 0;
    for (std::size_t p = 0; p < plane; ++p) acc += src[p];
    out[c] = acc / static_cast<T>(plane);
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape,
                                   const Tensor<T>& grad) {
  expect_rank(input_shape, 3, "global_avg_pool_backward");
  const std::size_t plane = input_shape[1] * input_shape[2];
  if (plane == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  if (grad.size() != input_shape[0]) {
    throw DimensionError("global_avg_pool_backward: grad length " +
                         std::to_string(grad.size()));
  }
  Tensor<T> out(input_shape);
  for (std::size_t c = 0; c < input_shape[0]; ++c) {
    const T v = grad[c] / static_cast<T>(plane);
    std::fill_n(out.data().data() + c * plane, plane, v);
  }
  return out;
}

// y = W x + b with W of shape (out, in).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  expect_rank(weight.shape(), 2, "linear weight");
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (x.size() != in_dim) {
    throw DimensionError("linear: input length " + std::to_string(x.size()) +
                         " vs weight axis 1 = " + std::to_string(in_dim));
  }
  Tensor<T> y({out_dim});
  for (std::size_t o = 0; o < out_dim; ++o) {
    T acc = bias.empty() ? T(0) : bias[o];
    const T* row = weight.data().data() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
  return y;
}

template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, Tensor<T>& weight,
                          Tensor<T>& bias, const Tensor<T>& grad_out) {
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (grad_out.size() != out_dim) {
    throw DimensionError("linear_backward: grad length " +
                         std::to_string(grad_out.size()));
  }
  Tensor<T> grad_in({in_dim});
  for (std::size_t o = 0; o < out_dim; ++o) {
    const T go = grad_out[o];
    const T* row = weight.data().data() + o * in_dim;
    if (weight.requires_grad()) {
      T* grow = weight.grad().data() + o * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) grow[i] += go * x[i];
    }
    for (std::size_t i = 0; i < in_dim; ++i) grad_in[i] += go * row[i];
    if (!bias.empty() && bias.requires_grad()) bias.grad()[o] += go;
  }
  return grad_in;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& z) {
  if (z.empty()) throw DimensionError("softmax: empty input");
  const T mx = *std::max_element(z.data().begin(), z.data().end());
  Tensor<T> p(z.shape());
  T sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - mx);
    sum += p[i];
  }
  for (auto& v : p.data()) v /= sum;
  return p;
}

// dL/dz = p * (g - <g, p>).
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& p, const Tensor<T>& grad) {
  T dot = 0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * grad[i];
  Tensor<T> out(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (grad[i] - dot);
  return out;
}

// A convolution with owned parameters.
template <typename T>
struct Conv2d {
  Tensor<T> weight;  // (C_out, C_in/groups, kh, kw)
  Tensor<T> bias;    // (C_out)
  std::size_t groups = 1;
  Padding padding = Padding::kSame;

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d(x, weight, bias, groups, padding);
  }
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& grad_out,
                     bool need_input_grad = true) {
    return conv2d_backward(x, weight, bias, groups, padding, grad_out,
                           need_input_grad);
  }
  std::size_t in_channels() const { return weight.dim(1) * groups; }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t param_count() const { return weight.size() + bias.size(); }
};

template <typename T>
struct Linear {
  Tensor<T> weight;  // (out, in)
  Tensor<T> bias;    // (out)

  Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight, bias); }
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    return linear_backward(x, weight, bias, grad_out);
  }
  std::size_t param_count() const { return weight.size() + bias.size(); }
};

}  // namespace ur2m::nn
