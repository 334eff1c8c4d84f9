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

#ifndef BRUSHWORK_MODEL_COMMON_H_
#define BRUSHWORK_MODEL_COMMON_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "brushwork/audio_frontend.h"
#include "brushwork/image_frontend.h"
#include "brushwork/layers.h"
#include "brushwork/network.h"
#include "brushwork/tensor.h"

namespace brushwork {

// Fixed affine map from log-mel units to network input units; log-mel
// values span roughly [-14, 8].
inline constexpr float kMelInputOffset = -4.0f;
inline constexpr float kMelInputScale = 5.0f;

// [N, 224, 224, 3]
Tensor image_batch(std::span<const ImageTensor* const> images);
Tensor image_batch(const ImageTensor& image);
// [N, 100, 320, 1], normalized with the constants above.
Tensor mel_batch(std::span<const MelPatch* const> patches);
Tensor mel_batch(const MelPatch& patch);

// Convolutional trunk: `channels.size()` blocks of conv-relu-maxpool; the
// first conv uses `first_stride`.
struct BranchConfig {
  std::vector<std::uint32_t> channels;
  std::uint32_t in_channels = 1;
  std::uint32_t kernel = 3;
  std::uint32_t first_stride = 2;
};

// Appends the conv blocks. When `pool_last` is false the final block is
// conv-relu only.
void append_conv_blocks(std::vector<LayerSpec>& specs, const BranchConfig& config,
                        bool pool_last);

// Keeps freed activation buffers in the heap instead of returning them to
// the OS between steps. Training loops call this once.
void retain_freed_memory();

std::uint64_t parameters_hash(std::span<const Parameter* const> params);

// Stores each stack under its position as the layer group.
Checkpoint pack_checkpoint(ModelKind kind,
                           std::span<const Sequential* const> groups);
// Rebuilds `group_count` stacks with their parameters. Throws FormatError
// for the wrong model kind and CorruptionError for a bad group layout.
std::vector<Sequential> unpack_checkpoint(const Checkpoint& checkpoint,
                                          ModelKind expected,
                                          std::size_t group_count);

// Writes one JSON object per line.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::filesystem::path& path);
  void write(const std::string& json_line);
  bool enabled() const { return out_ != nullptr; }

 private:
  std::shared_ptr<std::ostream> out_;
};

}  // namespace brushwork

#endif  // BRUSHWORK_MODEL_COMMON_H_
