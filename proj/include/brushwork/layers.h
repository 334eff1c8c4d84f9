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

#ifndef BRUSHWORK_LAYERS_H_
#define BRUSHWORK_LAYERS_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "brushwork/ops.h"
#include "brushwork/rng.h"
#include "brushwork/tensor.h"

namespace brushwork {

enum class LayerKind : std::uint8_t {
  kConv2d = 0,
  kDense = 1,
  kRelu = 2,
  kMaxPool = 3,
  kGlobalAvgPool = 4,
  kConcat = 5,
  kSoftmax = 6,
};

std::string_view layer_kind_name(LayerKind kind);

// Hyperparameters of one layer. Unused fields stay zero (e.g. relu).
// For conv2d in/out are channels, for dense they are widths, for maxpool
// kernel and stride describe the window.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::uint32_t kernel = 0;
  std::uint32_t stride = 1;
  Padding padding = Padding::kSame;
  std::uint32_t in = 0;
  std::uint32_t out = 0;

  void validate() const;

  static LayerSpec conv2d(std::uint32_t in, std::uint32_t out,
                          std::uint32_t kernel, std::uint32_t stride,
                          Padding padding);
  static LayerSpec dense(std::uint32_t in, std::uint32_t out);
  static LayerSpec relu();
  static LayerSpec maxpool(std::uint32_t window, std::uint32_t stride);
  static LayerSpec global_avg_pool();
  static LayerSpec concat();
  static LayerSpec softmax();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Parameter {
  Tensor value;
  Tensor gradient;
  Tensor momentum;

  explicit Parameter(Shape shape)
      : value(shape), gradient(shape), momentum(std::move(shape)) {}
};

// Activations a layer needs to run its backward pass.
struct LayerCache {
  Shape input_shape;
  Tensor input;
  Tensor output;
  std::vector<std::uint32_t> indices;
};

class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(spec) { spec_.validate(); }
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const LayerSpec& spec() const { return spec_; }

  // cache is null for inference.
  virtual Tensor forward(const Tensor& input, LayerCache* cache) const = 0;
  // Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Tensor backward(const Tensor& grad_output,
                          const LayerCache& cache) = 0;
  // Parameter gradients only, for a first layer whose input gradient is
  // never consumed.
  virtual void backward_parameters(const Tensor& grad_output,
                                   const LayerCache& cache) {
    backward(grad_output, cache);
  }

  virtual std::span<Parameter> parameters() { return {}; }
  virtual std::span<const Parameter> parameters() const { return {}; }
  // He-normal weights, zero biases.
  virtual void initialize(Rng& /*rng*/) {}

 private:
  LayerSpec spec_;
};

// Builds a single-input layer. Concat is a two-input join and is handled
// by the models directly, so it is not constructible here.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

// Fills with N(0, 2/fan_in).
void he_normal(Tensor& weights, std::size_t fan_in, Rng& rng);

// Concatenation along the feature axis of two [N,a] and [N,b] tensors,
// and the matching gradient split.
Tensor concat_features(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_features(const Tensor& grad,
                                         std::size_t left_width);

}  // namespace brushwork

#endif  // BRUSHWORK_LAYERS_H_
