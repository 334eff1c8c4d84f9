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

#ifndef BRUSHWORK_OPS_H_
#define BRUSHWORK_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "brushwork/tensor.h"

namespace brushwork {

enum class Padding : unsigned char { kSame = 0, kValid = 1 };

// Spatial bookkeeping shared by the convolution forward and backward
// kernels.
struct ConvGeometry {
  std::size_t height = 0, width = 0, channels = 0;
  std::size_t kernel = 1, stride = 1, filters = 0;
  std::size_t pad_top = 0, pad_left = 0;
  std::size_t out_height = 0, out_width = 0;

  static ConvGeometry make(std::size_t height, std::size_t width,
                           std::size_t channels, std::size_t kernel,
                           std::size_t stride, std::size_t filters,
                           Padding padding);
  std::size_t patch_size() const { return kernel * kernel * channels; }
  std::size_t out_pixels() const { return out_height * out_width; }
};

// Cross-correlation. input is [H,W,C] or [N,H,W,C]; weights [k,k,C,K];
// bias [K]. Output keeps the input's batch convention.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride, Padding padding);

// input [n] or [N,n], weights [n,m], bias [m].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

// Row-wise softmax over the last axis of [c] or [N,c].
Tensor softmax(const Tensor& logits);

struct LossResult {
  double loss = 0.0;      // mean over the batch
  Tensor logits_grad;     // d(loss)/d(logits), same shape as logits
};

// Mean of -log softmax(logits)[label] over the batch. logits is [c] (one
// label) or [N,c] (N labels).
LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const int> labels);
double softmax_cross_entropy(const Tensor& logits, int label);

namespace internal {

// Per-example convolution kernels over raw NHWC buffers. scratch is
// resized as needed and may be reused between calls.
void conv_forward_example(const ConvGeometry& g, const float* input,
                          const float* weights, const float* bias,
                          float* output, std::vector<float>& scratch);
// Writes this example's weight gradient partial to weight_grad and its
// input gradient to input_grad (either may be null to skip it).
// weights_t is the [K, k*k*C] transpose of the weight matrix.
void conv_backward_example(const ConvGeometry& g, const float* input,
                           const float* weights_t, const float* grad_out,
                           float* weight_grad, float* input_grad,
                           std::vector<float>& scratch);

}  // namespace internal

}  // namespace brushwork

#endif  // BRUSHWORK_OPS_H_
