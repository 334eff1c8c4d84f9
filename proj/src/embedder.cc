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

#include "brushwork/embedder.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "brushwork/errors.h"
#include "brushwork/layers.h"
#include "brushwork/ops.h"

namespace brushwork {
namespace {

constexpr std::size_t kMinClipsPerClass = 10;
constexpr std::size_t kEvalBatch = 16;

Sequential build_trunk(const BranchConfig& trunk) {
  if (trunk.channels.empty()) throw ValidationError("embedder needs at least one block");
  std::vector<LayerSpec> specs;
  append_conv_blocks(specs, trunk, false);
  specs.push_back(LayerSpec::global_avg_pool());
  return Sequential(specs);
}

Tensor mel_rows(std::span<const LabeledClip> clips, std::span<const std::size_t> which) {
  std::vector<const MelPatch*> ptrs;
  for (std::size_t i : which) ptrs.push_back(&clips[i].audio);
  return mel_batch(ptrs);
}

}  // namespace

AudioEmbedder::AudioEmbedder(const EmbedderConfig& config)
    : AudioEmbedder(build_trunk(config.trunk),
                    [&] {
                      const LayerSpec d[] = {
                          LayerSpec::dense(config.trunk.channels.back(), config.classes)};
                      return Sequential(d);
                    }()) {}

AudioEmbedder::AudioEmbedder(Sequential trunk, Sequential classifier)
    : trunk_(std::move(trunk)), classifier_(std::move(classifier)) {
  if (trunk_.size() == 0 ||
      trunk_.layer(trunk_.size() - 1).spec().kind != LayerKind::kGlobalAvgPool ||
      classifier_.size() != 1 ||
      classifier_.layer(0).spec().kind != LayerKind::kDense) {
    throw CorruptionError("inconsistent embedder layout");
  }
  dimension_ = classifier_.layer(0).spec().in;
  classes_ = classifier_.layer(0).spec().out;
  if (classes_ < 2) throw ValidationError("embedder needs at least two classes");
}

void AudioEmbedder::initialize(Rng& rng) {
  Rng trunk_rng = rng.fork(1);
  Rng head_rng = rng.fork(2);
  trunk_.initialize(trunk_rng);
  classifier_.initialize(head_rng);
}

Tensor AudioEmbedder::forward(const Tensor& mels) {
  return classifier_.forward(trunk_.forward(mels));
}

void AudioEmbedder::backward(const Tensor& logits_grad) {
  trunk_.backward(classifier_.backward(logits_grad), false);
}

Tensor AudioEmbedder::classify(const Tensor& mels) const {
  return classifier_.infer(trunk_.infer(mels));
}

Tensor AudioEmbedder::embed_batch(const Tensor& mels) const { return trunk_.infer(mels); }

std::vector<Parameter*> AudioEmbedder::parameters() {
  std::vector<Parameter*> out = trunk_.parameters();
  for (Parameter* p : classifier_.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> AudioEmbedder::parameters() const {
  std::vector<const Parameter*> out = trunk_.parameters();
  for (const Parameter* p : classifier_.parameters()) out.push_back(p);
  return out;
}

std::uint64_t AudioEmbedder::hash() const { return parameters_hash(parameters()); }

Checkpoint AudioEmbedder::to_checkpoint() const {
  const Sequential* groups[] = {&trunk_, &classifier_};
  return pack_checkpoint(ModelKind::kEmbedder, groups);
}

AudioEmbedder AudioEmbedder::from_checkpoint(const Checkpoint& checkpoint) {
  std::vector<Sequential> s = unpack_checkpoint(checkpoint, ModelKind::kEmbedder, 2);
  return AudioEmbedder(std::move(s[0]), std::move(s[1]));
}

void AudioEmbedder::save(const std::filesystem::path& path) const {
  write_file(path, serialize_checkpoint(to_checkpoint()));
}

AudioEmbedder AudioEmbedder::load(const std::filesystem::path& path) {
  return from_checkpoint(parse_checkpoint(read_file(path)));
}

Embedding embed_audio(const AudioEmbedder& model, const MelPatch& audio,
                      bool l2_normalize) {
  const Tensor e = model.embed_batch(mel_batch(audio));
  Embedding out;
  out.vector.assign(e.data(), e.data() + e.size());
  if (l2_normalize) {
    double norm = 0.0;
    for (float v : out.vector) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (float& v : out.vector) v = static_cast<float>(v / norm);
    }
  }
  return out;
}

double distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("embedding lengths differ: " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double distance(const Embedding& a, const Embedding& b) {
  return distance(std::span<const float>(a.vector), std::span<const float>(b.vector));
}

std::vector<LabeledClip> load_labeled_clips(const LabeledClipManifest& manifest) {
  std::map<std::filesystem::path, AudioClip> files;
  std::vector<LabeledClip> out;
  out.reserve(manifest.clips.size());
  for (const LabeledClipEntry& e : manifest.clips) {
    auto it = files.find(e.path);
    if (it == files.end()) it = files.emplace(e.path, load_audio(e.path, kSampleRate)).first;
    const auto start = static_cast<std::size_t>(std::llround(e.offset_seconds * kSampleRate));
    out.push_back({mel_patch(slice(it->second, start, kClipSamples)), e.class_id});
  }
  return out;
}

ClipSplit split_clips(std::span<const LabeledClip> clips) {
  std::map<int, std::size_t> seen;
  ClipSplit split;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::size_t rank = seen[clips[i].class_id]++;
    (rank % 10 == 9 ? split.heldout : split.train).push_back(i);
  }
  return split;
}

double classification_accuracy(const AudioEmbedder& model, std::span<const LabeledClip> clips,
                               std::span<const std::size_t> which) {
  if (which.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < which.size(); begin += kEvalBatch) {
    const auto part = which.subspan(begin, std::min(kEvalBatch, which.size() - begin));
    const Tensor logits = model.classify(mel_rows(clips, part));
    const std::size_t c = logits.dim(1);
    for (std::size_t r = 0; r < part.size(); ++r) {
      const float* row = logits.data() + r * c;
      const auto best = static_cast<int>(std::max_element(row, row + c) - row);
      correct += best == clips[part[r]].class_id;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(which.size());
}

EmbedderTrainResult train_embedder(std::span<const LabeledClip> clips,
                                   const EmbedderTrainConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const std::uint32_t classes = config.model.classes;
  std::vector<std::size_t> per_class(classes, 0);
  for (const LabeledClip& c : clips) {
    if (c.class_id < 0 || static_cast<std::uint32_t>(c.class_id) >= classes) {
      throw PreconditionError("clip class_id out of range: " + std::to_string(c.class_id));
    }
    ++per_class[c.class_id];
  }
  const auto present = std::count_if(per_class.begin(), per_class.end(),
                                     [](std::size_t n) { return n > 0; });
  if (present < 2) throw PreconditionError("embedder training needs at least two classes");
  for (std::uint32_t k = 0; k < classes; ++k) {
    if (per_class[k] < kMinClipsPerClass) {
      throw PreconditionError("class " + std::to_string(k) + " has " +
                              std::to_string(per_class[k]) + " clips, need 10");
    }
  }
  if (config.steps == 0) throw PreconditionError("training needs at least one step");

  retain_freed_memory();
  const ClipSplit split = split_clips(clips);
  Rng root(config.seed);
  EmbedderTrainResult result{AudioEmbedder(config.model), {}, 0.0, split.heldout.size(), 0.0};
  Rng init = root.fork(1);
  result.model.initialize(init);
  Rng sampler = root.fork(2);
  MetricsLog metrics;
  if (!config.metrics_path.empty()) metrics = MetricsLog(config.metrics_path);

  std::vector<std::size_t> batch(config.batch_size);
  std::vector<int> labels(config.batch_size);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch[i] = split.train[sampler.below(split.train.size())];
      labels[i] = clips[batch[i]].class_id;
    }
    const Tensor logits = result.model.forward(mel_rows(clips, batch));
    const LossResult loss = softmax_cross_entropy(logits, labels);
    if (!std::isfinite(loss.loss)) {
      throw TrainingError("loss became non-finite at step " + std::to_string(step));
    }
    result.model.backward(loss.logits_grad);
    std::vector<Parameter*> params = result.model.parameters();
    sgd_step(params, config.lr, config.momentum);
    result.losses.push_back(loss.loss);
    metrics.write(nlohmann::json{{"step", step}, {"loss", loss.loss}}.dump());
    spdlog::debug("embedder step {} loss {:.4f}", step, loss.loss);
  }
  result.heldout_accuracy = classification_accuracy(result.model, clips, split.heldout);
  metrics.write(nlohmann::json{{"step", config.steps},
                               {"heldout_accuracy", result.heldout_accuracy}}.dump());
  if (!config.checkpoint_path.empty()) result.model.save(config.checkpoint_path);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace brushwork
