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

#ifndef BRUSHWORK_NETWORK_H_
#define BRUSHWORK_NETWORK_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "brushwork/layers.h"
#include "brushwork/rng.h"
#include "brushwork/tensor.h"

namespace brushwork {

// Ordered layer stack with a single-use activation tape. forward() records
// what backward() needs; backward() consumes the tape. infer() never
// touches the tape and may be called concurrently on a frozen stack.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::span<const LayerSpec> specs);
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(const LayerSpec& spec);

  Tensor forward(const Tensor& input);
  Tensor infer(const Tensor& input) const;
  // Runs the first `count` layers only (inference).
  Tensor infer_prefix(const Tensor& input, std::size_t count) const;
  // Throws StateError when no forward pass has been recorded. With
  // `input_grad` false the returned tensor is empty and the first layer
  // computes parameter gradients only.
  Tensor backward(const Tensor& grad_output, bool input_grad = true);
  bool has_tape() const { return recorded_; }

  void initialize(Rng& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<LayerSpec> specs() const;
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<LayerCache> tape_;
  bool recorded_ = false;
};

// Momentum SGD: buffer <- momentum*buffer + grad; value <- value - lr*buffer;
// then the gradient is zeroed.
void sgd_step(std::span<Parameter* const> params, float lr, float momentum);
void zero_gradients(std::span<Parameter* const> params);

// On-disk model: magic "BWNN", format version, a layer table, then every
// parameter as little-endian float32 in declaration order.
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class ModelKind : std::uint8_t { kCorrespondence = 1, kEmbedder = 2 };

struct CheckpointLayer {
  LayerSpec spec;
  std::uint8_t group = 0;  // which sub-network the layer belongs to
  friend bool operator==(const CheckpointLayer&, const CheckpointLayer&) = default;
};

struct Checkpoint {
  ModelKind kind = ModelKind::kCorrespondence;
  std::vector<CheckpointLayer> layers;
  std::vector<Tensor> parameters;  // declaration order
};

// Parameter shapes implied by a layer spec (weights then bias).
std::vector<Shape> parameter_shapes(const LayerSpec& spec);

std::vector<std::byte> serialize_checkpoint(const Checkpoint& checkpoint);
// Throws FormatError (magic), VersionError, CorruptionError (truncated,
// trailing bytes, invalid layer table).
Checkpoint parse_checkpoint(std::span<const std::byte> bytes);

void write_file(const std::filesystem::path& path,
                std::span<const std::byte> bytes);
std::vector<std::byte> read_file(const std::filesystem::path& path);

}  // namespace brushwork

#endif  // BRUSHWORK_NETWORK_H_
