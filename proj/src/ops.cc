/*
 * Copyright 2026 The Brushwork Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "brushwork/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "brushwork/errors.h"
#include "gemm.h"

namespace brushwork {

namespace {

void im2col(const ConvGeometry& g, const float* input, float* cols) {
  const std::size_t patch = g.patch_size();
  for (std::size_t oy = 0; oy < g.out_height; ++oy) {
    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
      float* row = cols + (oy * g.out_width + ox) * patch;
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        const long iy = static_cast<long>(oy * g.stride + ky) -
                        static_cast<long>(g.pad_top);
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const long ix = static_cast<long>(ox * g.stride + kx) -
                          static_cast<long>(g.pad_left);
          float* dst = row + (ky * g.kernel + kx) * g.channels;
          if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) ||
              ix >= static_cast<long>(g.width)) {
            std::fill_n(dst, g.channels, 0.0f);
          } else {
            const float* src =
                input + (static_cast<std::size_t>(iy) * g.width +
                         static_cast<std::size_t>(ix)) *
                            g.channels;
            std::copy_n(src, g.channels, dst);
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const float* cols, float* input_grad) {
  std::fill_n(input_grad, g.height * g.width * g.channels, 0.0f);
  const std::size_t patch = g.patch_size();
  for (std::size_t oy = 0; oy < g.out_height; ++oy) {
    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
      const float* row = cols + (oy * g.out_width + ox) * patch;
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        const long iy = static_cast<long>(oy * g.stride + ky) -
                        static_cast<long>(g.pad_top);
        if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const long ix = static_cast<long>(ox * g.stride + kx) -
                          static_cast<long>(g.pad_left);
          if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
          const float* src = row + (ky * g.kernel + kx) * g.channels;
          float* dst = input_grad +
                       (static_cast<std::size_t>(iy) * g.width +
                        static_cast<std::size_t>(ix)) *
                           g.channels;
          for (std::size_t c = 0; c < g.channels; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

ConvGeometry ConvGeometry::make(std::size_t height, std::size_t width,
                                std::size_t channels, std::size_t kernel,
                                std::size_t stride, std::size_t filters,
                                Padding padding) {
  require(kernel % 2 == 1, "conv2d kernel size must be odd");
  require(stride >= 1, "conv2d stride must be >= 1");
  ConvGeometry g;
  g.height = height;
  g.width = width;
  g.channels = channels;
  g.kernel = kernel;
  g.stride = stride;
  g.filters = filters;
  if (padding == Padding::kSame) {
    g.out_height = (height + stride - 1) / stride;
    g.out_width = (width + stride - 1) / stride;
    const std::size_t need_h = (g.out_height - 1) * stride + kernel;
    const std::size_t need_w = (g.out_width - 1) * stride + kernel;
    g.pad_top = need_h > height ? (need_h - height) / 2 : 0;
    g.pad_left = need_w > width ? (need_w - width) / 2 : 0;
  } else {
    require(height >= kernel && width >= kernel,
            "conv2d valid padding needs input at least as large as kernel");
    g.out_height = (height - kernel) / stride + 1;
    g.out_width = (width - kernel) / stride + 1;
  }
  return g;
}

namespace internal {

void conv_forward_example(const ConvGeometry& g, const float* input,
                          const float* weights, const float* bias,
                          float* output, std::vector<float>& scratch) {
  const std::size_t patch = g.patch_size();
  const std::size_t pixels = g.out_pixels();
  scratch.resize(pixels * patch);
  im2col(g, input, scratch.data());
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(bias, g.filters, output + p * g.filters);
  }
  gemm_nn(pixels, g.filters, patch, scratch.data(), patch, weights, g.filters,
          output, g.filters, /*accumulate=*/true);
}

void conv_backward_example(const ConvGeometry& g, const float* input,
                           const float* weights_t, const float* grad_out,
                           float* weight_grad, float* input_grad,
                           std::vector<float>& scratch) {
  const std::size_t patch = g.patch_size();
  const std::size_t pixels = g.out_pixels();
  scratch.resize(2 * pixels * patch);
  float* cols = scratch.data();
  float* aux = scratch.data() + pixels * patch;
  if (weight_grad != nullptr) {
    im2col(g, input, cols);
    transpose(pixels, patch, cols, aux);
    gemm_nn(patch, g.filters, pixels, aux, pixels, grad_out, g.filters,
            weight_grad, g.filters, /*accumulate=*/false);
  }
  if (input_grad != nullptr) {
    gemm_nn(pixels, patch, g.filters, grad_out, g.filters, weights_t, patch,
            aux, patch, /*accumulate=*/false);
    col2im(g, aux, input_grad);
  }
}

}  // namespace internal

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride, Padding padding) {
  const bool batched = input.rank() == 4;
  require(batched || input.rank() == 3,
          "conv2d input must be [H,W,C] or [N,H,W,C], got " +
              shape_string(input.shape()));
  require(weights.rank() == 4 && weights.dim(0) == weights.dim(1),
          "conv2d weights must be [k,k,C,K], got " +
              shape_string(weights.shape()));
  const std::size_t off = batched ? 1 : 0;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t channels = input.dim(off + 2);
  require(weights.dim(2) == channels,
          "conv2d channel mismatch: input " + shape_string(input.shape()) +
              " weights " + shape_string(weights.shape()));
  require(bias.rank() == 1 && bias.dim(0) == weights.dim(3),
          "conv2d bias must be [K]");
  const auto g =
      ConvGeometry::make(input.dim(off), input.dim(off + 1), channels,
                         weights.dim(0), stride, weights.dim(3), padding);
  Shape out_shape{g.out_height, g.out_width, g.filters};
  if (batched) out_shape.insert(out_shape.begin(), batch);
  Tensor out(out_shape);
  std::vector<float> scratch;
  const std::size_t in_stride = g.height * g.width * g.channels;
  const std::size_t out_stride = g.out_pixels() * g.filters;
  for (std::size_t n = 0; n < batch; ++n) {
    internal::conv_forward_example(g, input.data() + n * in_stride,
                                   weights.data(), bias.data(),
                                   out.data() + n * out_stride, scratch);
  }
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const bool batched = input.rank() == 2;
  require(batched || input.rank() == 1,
          "dense input must be [n] or [N,n], got " +
              shape_string(input.shape()));
  const std::size_t n_in = input.dim(batched ? 1 : 0);
  require(weights.rank() == 2 && weights.dim(0) == n_in,
          "dense weight shape " + shape_string(weights.shape()) +
              " does not match input " + shape_string(input.shape()));
  const std::size_t n_out = weights.dim(1);
  require(bias.rank() == 1 && bias.dim(0) == n_out,
          "dense bias must be [m]");
  const std::size_t batch = batched ? input.dim(0) : 1;
  Tensor out(batched ? Shape{batch, n_out} : Shape{n_out});
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(bias.data(), n_out, out.data() + i * n_out);
  }
  internal::gemm_nn(batch, n_out, n_in, input.data(), n_in, weights.data(),
                    n_out, out.data(), n_out, /*accumulate=*/true);
  return out;
}

Tensor softmax(const Tensor& logits) {
  require(logits.rank() == 1 || logits.rank() == 2,
          "softmax expects [c] or [N,c]");
  const std::size_t c = logits.dim(logits.rank() - 1);
  const std::size_t rows = logits.size() / c;
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* x = logits.data() + r * c;
    float* y = out.data() + r * c;
    const float mx = *std::max_element(x, x + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(double(x[j]) - mx);
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = static_cast<float>(std::exp(double(x[j]) - mx) / total);
    }
  }
  return out;
}

LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const int> labels) {
  require(logits.rank() == 1 || logits.rank() == 2,
          "softmax_cross_entropy expects [c] or [N,c]");
  const std::size_t c = logits.dim(logits.rank() - 1);
  const std::size_t rows = logits.size() / c;
  if (c < 2) throw PreconditionError("softmax_cross_entropy needs >= 2 classes");
  if (labels.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(rows) + " rows");
  }
  LossResult result;
  result.logits_grad = Tensor(logits.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw PreconditionError("label " + std::to_string(label) +
                              " out of range for " + std::to_string(c) +
                              " classes");
    }
    const float* x = logits.data() + r * c;
    float* g = result.logits_grad.data() + r * c;
    const double mx = *std::max_element(x, x + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(double(x[j]) - mx);
    const double log_norm = mx + std::log(sum);
    total += log_norm - x[label];
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(double(x[j]) - log_norm);
      g[j] = static_cast<float>(
          (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) /
          static_cast<double>(rows));
    }
  }
  result.loss = total / static_cast<double>(rows);
  return result;
}

double softmax_cross_entropy(const Tensor& logits, int label) {
  if (logits.rank() != 1) {
    throw ShapeError("single-label softmax_cross_entropy expects [c]");
  }
  const int labels[] = {label};
  return softmax_cross_entropy(logits, labels).loss;
}

}  // namespace brushwork
