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

#include "brushwork/layers.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "brushwork/errors.h"
#include "gemm.h"

namespace brushwork {

namespace {

void expect_rank(const Tensor& t, std::size_t rank, std::string_view layer) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(layer) + " expects a rank-" +
                     std::to_string(rank) + " input, got " +
                     shape_string(t.shape()));
  }
}

class Conv2dLayer final : public Layer {
 public:
  explicit Conv2dLayer(const LayerSpec& spec) : Layer(spec) {
    params_.emplace_back(Shape{spec.kernel, spec.kernel, spec.in, spec.out});
    params_.emplace_back(Shape{spec.out});
  }

  Tensor forward(const Tensor& input, LayerCache* cache) const override {
    expect_rank(input, 4, "conv2d");
    const auto g = geometry(input);
    const std::size_t batch = input.dim(0);
    Tensor out({batch, g.out_height, g.out_width, g.filters});
    const std::size_t in_stride = g.height * g.width * g.channels;
    const std::size_t out_stride = g.out_pixels() * g.filters;
#pragma omp parallel
    {
      std::vector<float> scratch;
#pragma omp for schedule(static)
      for (std::size_t n = 0; n < batch; ++n) {
        internal::conv_forward_example(g, input.data() + n * in_stride,
                                       params_[0].value.data(),
                                       params_[1].value.data(),
                                       out.data() + n * out_stride, scratch);
      }
    }
    if (cache != nullptr) cache->input = input;
    return out;
  }

  Tensor backward(const Tensor& grad_output,
                  const LayerCache& cache) override {
    return run_backward(grad_output, cache, true);
  }

  void backward_parameters(const Tensor& grad_output,
                           const LayerCache& cache) override {
    run_backward(grad_output, cache, false);
  }

  std::span<Parameter> parameters() override { return params_; }
  std::span<const Parameter> parameters() const override { return params_; }

  void initialize(Rng& rng) override {
    he_normal(params_[0].value, spec().kernel * spec().kernel * spec().in, rng);
    params_[1].value.fill(0.0f);
  }

 private:
  Tensor run_backward(const Tensor& grad_output, const LayerCache& cache,
                      bool input_grad) {
    const Tensor& input = cache.input;
    const auto g = geometry(input);
    const std::size_t batch = input.dim(0);
    const std::size_t patch = g.patch_size();
    const std::size_t in_stride = g.height * g.width * g.channels;
    const std::size_t out_stride = g.out_pixels() * g.filters;
    if (grad_output.size() != batch * out_stride) {
      throw ShapeError("conv2d backward: gradient shape " +
                       shape_string(grad_output.shape()));
    }
    std::vector<float> weights_t(patch * g.filters);
    internal::transpose(patch, g.filters, params_[0].value.data(),
                        weights_t.data());
    Tensor grad_input = input_grad ? Tensor(input.shape()) : Tensor();
    const std::size_t wsize = patch * g.filters;
    std::vector<float> partials(batch * wsize);
#pragma omp parallel
    {
      std::vector<float> scratch;
#pragma omp for schedule(static)
      for (std::size_t n = 0; n < batch; ++n) {
        internal::conv_backward_example(
            g, input.data() + n * in_stride, weights_t.data(),
            grad_output.data() + n * out_stride, partials.data() + n * wsize,
            input_grad ? grad_input.data() + n * in_stride : nullptr, scratch);
      }
    }
    // Per-example partials are reduced in example order so the result does
    // not depend on the thread count.
    float* wgrad = params_[0].gradient.data();
    float* bgrad = params_[1].gradient.data();
    for (std::size_t n = 0; n < batch; ++n) {
      const float* part = partials.data() + n * wsize;
      for (std::size_t i = 0; i < wsize; ++i) wgrad[i] += part[i];
      const float* go = grad_output.data() + n * out_stride;
      for (std::size_t p = 0; p < g.out_pixels(); ++p) {
        for (std::size_t k = 0; k < g.filters; ++k) bgrad[k] += go[p * g.filters + k];
      }
    }
    return grad_input;
  }

  ConvGeometry geometry(const Tensor& input) const {
    if (input.dim(3) != spec().in) {
      throw ShapeError("conv2d expects " + std::to_string(spec().in) +
                       " input channels, got " + shape_string(input.shape()));
    }
    return ConvGeometry::make(input.dim(1), input.dim(2), input.dim(3),
                              spec().kernel, spec().stride, spec().out,
                              spec().padding);
  }

  std::vector<Parameter> params_;
};

class DenseLayer final : public Layer {
 public:
  explicit DenseLayer(const LayerSpec& spec) : Layer(spec) {
    params_.emplace_back(Shape{spec.in, spec.out});
    params_.emplace_back(Shape{spec.out});
  }

  Tensor forward(const Tensor& input, LayerCache* cache) const override {
    expect_rank(input, 2, "dense");
    Tensor out = dense(input, params_[0].value, params_[1].value);
    if (cache != nullptr) cache->input = input;
    return out;
  }

  Tensor backward(const Tensor& grad_output,
                  const LayerCache& cache) override {
    const Tensor& input = cache.input;
    const std::size_t batch = input.dim(0);
    const std::size_t n_in = spec().in, n_out = spec().out;
    if (grad_output.shape() != Shape{batch, n_out}) {
      throw ShapeError("dense backward: gradient shape " +
                       shape_string(grad_output.shape()));
    }
    std::vector<float> input_t(n_in * batch);
    internal::transpose(batch, n_in, input.data(), input_t.data());
    internal::gemm_nn(n_in, n_out, batch, input_t.data(), batch,
                      grad_output.data(), n_out, params_[0].gradient.data(),
                      n_out, /*accumulate=*/true);
    float* bgrad = params_[1].gradient.data();
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t j = 0; j < n_out; ++j) bgrad[j] += grad_output[n * n_out + j];
    }
    std::vector<float> weights_t(n_out * n_in);
    internal::transpose(n_in, n_out, params_[0].value.data(), weights_t.data());
    Tensor grad_input(input.shape());
    internal::gemm_nn(batch, n_in, n_out, grad_output.data(), n_out,
                      weights_t.data(), n_in, grad_input.data(), n_in,
                      /*accumulate=*/false);
    return grad_input;
  }

  std::span<Parameter> parameters() override { return params_; }
  std::span<const Parameter> parameters() const override { return params_; }

  void initialize(Rng& rng) override {
    he_normal(params_[0].value, spec().in, rng);
    params_[1].value.fill(0.0f);
  }

 private:
  std::vector<Parameter> params_;
};

class ReluLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& input, LayerCache* cache) const override {
    Tensor out = input;
    for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
    if (cache != nullptr) cache->output = out;
    return out;
  }

  Tensor backward(const Tensor& grad_output,
                  const LayerCache& cache) override {
    if (grad_output.shape() != cache.output.shape()) {
      throw ShapeError("relu backward: gradient shape mismatch");
    }
    Tensor grad = grad_output;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!(cache.output[i] > 0.0f)) grad[i] = 0.0f;
    }
    return grad;
  }
};

class MaxPoolLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& input, LayerCache* cache) const override {
    expect_rank(input, 4, "maxpool");
    const std::size_t batch = input.dim(0), h = input.dim(1), w = input.dim(2),
                      c = input.dim(3);
    const std::size_t win = spec().kernel, st = spec().stride;
    if (h < win || w < win) {
      throw ShapeError("maxpool window larger than input " +
                       shape_string(input.shape()));
    }
    const std::size_t oh = (h - win) / st + 1, ow = (w - win) / st + 1;
    Tensor out({batch, oh, ow, c});
    std::vector<std::uint32_t> indices;
    if (cache != nullptr) indices.resize(out.size());
    for (std::size_t n = 0; n < batch; ++n) {
      const float* x = input.data() + n * h * w * c;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            std::size_t best = (oy * st * w + ox * st) * c + ch;
            for (std::size_t ky = 0; ky < win; ++ky) {
              for (std::size_t kx = 0; kx < win; ++kx) {
                const std::size_t idx =
                    ((oy * st + ky) * w + (ox * st + kx)) * c + ch;
                if (x[idx] > x[best]) best = idx;
              }
            }
            const std::size_t o = ((n * oh + oy) * ow + ox) * c + ch;
            out[o] = x[best];
            if (cache != nullptr) {
              indices[o] = static_cast<std::uint32_t>(best + n * h * w * c);
            }
          }
        }
      }
    }
    if (cache != nullptr) {
      cache->input_shape = input.shape();
      cache->indices = std::move(indices);
    }
    return out;
  }

  Tensor backward(const Tensor& grad_output,
                  const LayerCache& cache) override {
    if (grad_output.size() != cache.indices.size()) {
      throw ShapeError("maxpool backward: gradient shape mismatch");
    }
    Tensor grad(cache.input_shape);
    for (std::size_t o = 0; o < grad_output.size(); ++o) {
      grad[cache.indices[o]] += grad_output[o];
    }
    return grad;
  }
};

class GlobalAvgPoolLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& input, LayerCache* cache) const override {
    expect_rank(input, 4, "global_avg_pool");
    const std::size_t batch = input.dim(0), c = input.dim(3);
    const std::size_t pixels = input.dim(1) * input.dim(2);
    Tensor out({batch, c});
    std::vector<double> acc(c);
    for (std::size_t n = 0; n < batch; ++n) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const float* x = input.data() + n * pixels * c;
      for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += x[p * c + ch];
      }
      for (std::size_t ch = 0; ch < c; ++ch) {
        out[n * c + ch] = static_cast<float>(acc[ch] / double(pixels));
      }
    }
    if (cache != nullptr) cache->input_shape = input.shape();
    return out;
  }

  Tensor backward(const Tensor& grad_output,
                  const LayerCache& cache) override {
    const Shape& shape = cache.input_shape;
    const std::size_t batch = shape[0], c = shape[3];
    const std::size_t pixels = shape[1] * shape[2];
    if (grad_output.shape() != Shape{batch, c}) {
      throw ShapeError("global_avg_pool backward: gradient shape mismatch");
    }
    Tensor grad(shape);
    const float scale = 1.0f / static_cast<float>(pixels);
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          grad[(n * pixels + p) * c + ch] = grad_output[n * c + ch] * scale;
        }
      }
    }
    return grad;
  }
};

class SoftmaxLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& input, LayerCache* cache) const override {
    Tensor out = softmax(input);
    if (cache != nullptr) cache->output = out;
    return out;
  }

  Tensor backward(const Tensor& grad_output,
                  const LayerCache& cache) override {
    const Tensor& y = cache.output;
    if (grad_output.shape() != y.shape()) {
      throw ShapeError("softmax backward: gradient shape mismatch");
    }
    const std::size_t c = y.dim(y.rank() - 1);
    Tensor grad(y.shape());
    for (std::size_t r = 0; r < y.size() / c; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        dot += double(grad_output[r * c + j]) * y[r * c + j];
      }
      for (std::size_t j = 0; j < c; ++j) {
        grad[r * c + j] = static_cast<float>(
            y[r * c + j] * (grad_output[r * c + j] - dot));
      }
    }
    return grad;
  }
};

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  auto fail = [this](const std::string& why) {
    throw ValidationError(std::string(layer_kind_name(kind)) + ": " + why);
  };
  if (stride < 1) fail("stride must be >= 1");
  switch (kind) {
    case LayerKind::kConv2d:
      if (kernel == 0 || kernel % 2 == 0) fail("kernel must be odd");
      if (in == 0 || out == 0) fail("channel counts must be positive");
      if (padding != Padding::kSame && padding != Padding::kValid) {
        fail("unknown padding mode");
      }
      break;
    case LayerKind::kDense:
      if (in == 0 || out == 0) fail("widths must be positive");
      break;
    case LayerKind::kMaxPool:
      if (kernel == 0) fail("window must be positive");
      break;
    case LayerKind::kRelu:
    case LayerKind::kGlobalAvgPool:
    case LayerKind::kConcat:
    case LayerKind::kSoftmax:
      break;
    default:
      fail("unknown layer kind");
  }
}

LayerSpec LayerSpec::conv2d(std::uint32_t in, std::uint32_t out,
                            std::uint32_t kernel, std::uint32_t stride,
                            Padding padding) {
  return {LayerKind::kConv2d, kernel, stride, padding, in, out};
}
LayerSpec LayerSpec::dense(std::uint32_t in, std::uint32_t out) {
  return {LayerKind::kDense, 0, 1, Padding::kSame, in, out};
}
LayerSpec LayerSpec::relu() { return {LayerKind::kRelu}; }
LayerSpec LayerSpec::maxpool(std::uint32_t window, std::uint32_t stride) {
  return {LayerKind::kMaxPool, window, stride, Padding::kValid, 0, 0};
}
LayerSpec LayerSpec::global_avg_pool() { return {LayerKind::kGlobalAvgPool}; }
LayerSpec LayerSpec::concat() { return {LayerKind::kConcat}; }
LayerSpec LayerSpec::softmax() { return {LayerKind::kSoftmax}; }

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kConv2d: return std::make_unique<Conv2dLayer>(spec);
    case LayerKind::kDense: return std::make_unique<DenseLayer>(spec);
    case LayerKind::kRelu: return std::make_unique<ReluLayer>(spec);
    case LayerKind::kMaxPool: return std::make_unique<MaxPoolLayer>(spec);
    case LayerKind::kGlobalAvgPool:
      return std::make_unique<GlobalAvgPoolLayer>(spec);
    case LayerKind::kSoftmax: return std::make_unique<SoftmaxLayer>(spec);
    case LayerKind::kConcat:
      throw ValidationError("concat joins two branches and is not a stack layer");
  }
  throw ValidationError("unknown layer kind");
}

void he_normal(Tensor& weights, std::size_t fan_in, Rng& rng) {
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (float& w : weights.values()) w = static_cast<float>(rng.normal() * std_dev);
}

Tensor concat_features(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("concat expects [N,a] and [N,b], got " +
                     shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const std::size_t n = a.dim(0), wa = a.dim(1), wb = b.dim(1);
  Tensor out({n, wa + wb});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * wa, wa, out.data() + i * (wa + wb));
    std::copy_n(b.data() + i * wb, wb, out.data() + i * (wa + wb) + wa);
  }
  return out;
}

std::pair<Tensor, Tensor> split_features(const Tensor& grad,
                                         std::size_t left_width) {
  if (grad.rank() != 2 || grad.dim(1) < left_width) {
    throw ShapeError("split_features: bad gradient shape " +
                     shape_string(grad.shape()));
  }
  const std::size_t n = grad.dim(0), w = grad.dim(1), wr = w - left_width;
  Tensor left({n, left_width}), right({n, wr});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(grad.data() + i * w, left_width, left.data() + i * left_width);
    std::copy_n(grad.data() + i * w + left_width, wr, right.data() + i * wr);
  }
  return {std::move(left), std::move(right)};
}

}  // namespace brushwork
