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

#include "brushwork/model_common.h"

#include <algorithm>
#include <fstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "brushwork/errors.h"
#include "brushwork/hash.h"

namespace brushwork {

Tensor image_batch(std::span<const ImageTensor* const> images) {
  const std::size_t per = kImageSide * kImageSide * kImageChannels;
  Tensor out({images.size(), kImageSide, kImageSide, kImageChannels});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->values.size() != per) {
      throw ShapeError("image tensor must be 224x224x3");
    }
    std::copy(images[i]->values.begin(), images[i]->values.end(), out.data() + i * per);
  }
  return out;
}

Tensor image_batch(const ImageTensor& image) {
  const ImageTensor* one[] = {&image};
  return image_batch(one);
}

Tensor mel_batch(std::span<const MelPatch* const> patches) {
  const std::size_t per = MelConfig::kBins * MelConfig::kFrames;
  Tensor out({patches.size(), MelConfig::kBins, MelConfig::kFrames, 1});
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i]->values.size() != per) {
      throw ShapeError("mel patch must be 100x320");
    }
    float* dst = out.data() + i * per;
    for (std::size_t j = 0; j < per; ++j) {
      dst[j] = (patches[i]->values[j] - kMelInputOffset) / kMelInputScale;
    }
  }
  return out;
}

Tensor mel_batch(const MelPatch& patch) {
  const MelPatch* one[] = {&patch};
  return mel_batch(one);
}

void append_conv_blocks(std::vector<LayerSpec>& specs, const BranchConfig& config,
                        bool pool_last) {
  std::uint32_t in = config.in_channels;
  for (std::size_t i = 0; i < config.channels.size(); ++i) {
    const std::uint32_t stride = i == 0 ? config.first_stride : 1;
    specs.push_back(LayerSpec::conv2d(in, config.channels[i], config.kernel,
                                      stride, Padding::kSame));
    specs.push_back(LayerSpec::relu());
    if (pool_last || i + 1 < config.channels.size()) {
      specs.push_back(LayerSpec::maxpool(2, 2));
    }
    in = config.channels[i];
  }
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

std::uint64_t parameters_hash(std::span<const Parameter* const> params) {
  Fnv1a h;
  for (const Parameter* p : params) h.update_values(p->value.values());
  return h.digest();
}

Checkpoint pack_checkpoint(ModelKind kind,
                           std::span<const Sequential* const> groups) {
  Checkpoint cp;
  cp.kind = kind;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const LayerSpec& spec : groups[g]->specs()) {
      cp.layers.push_back({spec, static_cast<std::uint8_t>(g)});
    }
    for (const Parameter* p : groups[g]->parameters()) {
      cp.parameters.push_back(p->value);
    }
  }
  return cp;
}

std::vector<Sequential> unpack_checkpoint(const Checkpoint& checkpoint,
                                          ModelKind expected,
                                          std::size_t group_count) {
  if (checkpoint.kind != expected) {
    throw FormatError("checkpoint holds a different model kind");
  }
  std::vector<Sequential> stacks(group_count);
  std::size_t last_group = 0;
  for (const CheckpointLayer& layer : checkpoint.layers) {
    if (layer.group >= group_count || layer.group < last_group) {
      throw CorruptionError("checkpoint layer groups out of order");
    }
    last_group = layer.group;
    stacks[layer.group].add(layer.spec);
  }
  std::size_t next = 0;
  for (Sequential& s : stacks) {
    for (Parameter* p : s.parameters()) {
      if (next >= checkpoint.parameters.size() ||
          checkpoint.parameters[next].shape() != p->value.shape()) {
        throw CorruptionError("checkpoint parameters do not match layer table");
      }
      p->value = checkpoint.parameters[next++];
    }
  }
  if (next != checkpoint.parameters.size()) {
    throw CorruptionError("checkpoint has extra parameters");
  }
  return stacks;
}

MetricsLog::MetricsLog(const std::filesystem::path& path)
    : out_(std::make_shared<std::ofstream>(path, std::ios::trunc)) {
  if (!*out_) throw IoError("cannot open metrics log " + path.string());
}

void MetricsLog::write(const std::string& json_line) {
  if (out_) *out_ << json_line << '\n' << std::flush;
}

}  // namespace brushwork
