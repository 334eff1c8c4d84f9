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

#include "brushwork/network.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "brushwork/byte_io.h"
#include "brushwork/errors.h"

namespace brushwork {

Sequential::Sequential(std::span<const LayerSpec> specs) {
  for (const auto& spec : specs) add(spec);
}

void Sequential::add(const LayerSpec& spec) {
  layers_.push_back(make_layer(spec));
  recorded_ = false;
}

Tensor Sequential::forward(const Tensor& input) {
  tape_.assign(layers_.size(), LayerCache{});
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, &tape_[i]);
  }
  recorded_ = true;
  return x;
}

Tensor Sequential::infer(const Tensor& input) const {
  return infer_prefix(input, layers_.size());
}

Tensor Sequential::infer_prefix(const Tensor& input, std::size_t count) const {
  Tensor x = input;
  for (std::size_t i = 0; i < count && i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, nullptr);
  }
  return x;
}

Tensor Sequential::backward(const Tensor& grad_output, bool input_grad) {
  if (!recorded_) {
    throw StateError("backward called without a recorded forward pass");
  }
  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i == 0 && !input_grad) {
      layers_[0]->backward_parameters(g, tape_[0]);
      g = Tensor();
      break;
    }
    g = layers_[i]->backward(g, tape_[i]);
  }
  tape_.clear();
  recorded_ = false;
  return g;
}

void Sequential::initialize(Rng& rng) {
  for (auto& layer : layers_) layer->initialize(rng);
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter& p : layer->parameters()) out.push_back(&p);
  }
  return out;
}

std::vector<const Parameter*> Sequential::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& layer : layers_) {
    for (const Parameter& p : std::as_const(*layer).parameters()) out.push_back(&p);
  }
  return out;
}

std::vector<LayerSpec> Sequential::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& layer : layers_) out.push_back(layer->spec());
  return out;
}

void sgd_step(std::span<Parameter* const> params, float lr, float momentum) {
  for (Parameter* p : params) {
    float* value = p->value.data();
    float* grad = p->gradient.data();
    float* buf = p->momentum.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      buf[i] = momentum * buf[i] + grad[i];
      value[i] -= lr * buf[i];
      grad[i] = 0.0f;
    }
  }
}

void zero_gradients(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->gradient.fill(0.0f);
}

std::vector<Shape> parameter_shapes(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kConv2d:
      return {{spec.kernel, spec.kernel, spec.in, spec.out}, {spec.out}};
    case LayerKind::kDense:
      return {{spec.in, spec.out}, {spec.out}};
    default:
      return {};
  }
}

namespace {
constexpr char kMagic[4] = {'B', 'W', 'N', 'N'};
}  // namespace

std::vector<std::byte> serialize_checkpoint(const Checkpoint& checkpoint) {
  ByteWriter w;
  w.raw(std::as_bytes(std::span(kMagic)));
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(checkpoint.kind));
  w.u32(static_cast<std::uint32_t>(checkpoint.layers.size()));
  std::size_t expected = 0;
  for (const auto& layer : checkpoint.layers) {
    w.u8(static_cast<std::uint8_t>(layer.spec.kind));
    w.u8(layer.group);
    w.u8(static_cast<std::uint8_t>(layer.spec.padding));
    w.u8(0);
    w.u32(layer.spec.kernel);
    w.u32(layer.spec.stride);
    w.u32(layer.spec.in);
    w.u32(layer.spec.out);
    expected += parameter_shapes(layer.spec).size();
  }
  if (expected != checkpoint.parameters.size()) {
    throw ShapeError("checkpoint has " +
                     std::to_string(checkpoint.parameters.size()) +
                     " parameter tensors, layer table implies " +
                     std::to_string(expected));
  }
  for (const Tensor& t : checkpoint.parameters) w.f32_array(t.values());
  return w.take();
}

Checkpoint parse_checkpoint(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4) throw CorruptionError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a model checkpoint (bad magic)");
  }
  r.skip(4);
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) +
                       " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint cp;
  const std::uint8_t kind = r.u8();
  if (kind != static_cast<std::uint8_t>(ModelKind::kCorrespondence) &&
      kind != static_cast<std::uint8_t>(ModelKind::kEmbedder)) {
    throw CorruptionError("unknown model kind " + std::to_string(kind));
  }
  cp.kind = static_cast<ModelKind>(kind);
  const std::uint32_t count = r.u32();
  if (count > bytes.size() / 20) throw CorruptionError("layer count exceeds file size");
  std::vector<Shape> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointLayer layer;
    const std::uint8_t lk = r.u8();
    layer.group = r.u8();
    const std::uint8_t pad = r.u8();
    r.u8();
    if (lk > static_cast<std::uint8_t>(LayerKind::kSoftmax) || pad > 1) {
      throw CorruptionError("invalid layer table entry " + std::to_string(i));
    }
    layer.spec.kind = static_cast<LayerKind>(lk);
    layer.spec.padding = static_cast<Padding>(pad);
    layer.spec.kernel = r.u32();
    layer.spec.stride = r.u32();
    layer.spec.in = r.u32();
    layer.spec.out = r.u32();
    try {
      layer.spec.validate();
    } catch (const ValidationError& e) {
      throw CorruptionError(std::string("invalid layer table: ") + e.what());
    }
    for (auto& s : parameter_shapes(layer.spec)) shapes.push_back(std::move(s));
    cp.layers.push_back(layer);
  }
  for (auto& shape : shapes) {
    Tensor t(shape);
    r.f32_array(t.values());
    cp.parameters.push_back(std::move(t));
  }
  if (!r.at_end()) throw CorruptionError("trailing bytes after checkpoint data");
  return cp;
}

void write_file(const std::filesystem::path& path,
                std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(size));
  if (!in) throw IoError("failed reading " + path.string());
  return bytes;
}

}  // namespace brushwork
