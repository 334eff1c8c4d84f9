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

#ifndef BRUSHWORK_EMBEDDER_H_
#define BRUSHWORK_EMBEDDER_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "brushwork/audio_frontend.h"
#include "brushwork/manifest.h"
#include "brushwork/model_common.h"
#include "brushwork/network.h"
#include "brushwork/rng.h"
#include "brushwork/tensor.h"

namespace brushwork {

struct EmbedderConfig {
  // The last block has no pooling; its channel count is the embedding size.
  BranchConfig trunk{{16, 32, 64, 512}, 1, 3, 2};
  std::uint32_t classes = 3;
};

struct Embedding {
  std::vector<float> vector;
  std::string source = "live";  // track id or "live"
  std::uint32_t chunk_index = 0;
};

// Conv classifier whose final conv activation, averaged over time and
// frequency, is the embedding.
class AudioEmbedder {
 public:
  explicit AudioEmbedder(const EmbedderConfig& config = {});

  void initialize(Rng& rng);

  Tensor forward(const Tensor& mels);  // logits, records tapes
  void backward(const Tensor& logits_grad);
  Tensor classify(const Tensor& mels) const;
  Tensor embed_batch(const Tensor& mels) const;  // [N, D]

  std::uint32_t dimension() const { return dimension_; }
  std::uint32_t classes() const { return classes_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::uint64_t hash() const;

  Checkpoint to_checkpoint() const;
  static AudioEmbedder from_checkpoint(const Checkpoint& checkpoint);
  void save(const std::filesystem::path& path) const;
  static AudioEmbedder load(const std::filesystem::path& path);

 private:
  AudioEmbedder(Sequential trunk, Sequential classifier);

  Sequential trunk_;
  Sequential classifier_;
  std::uint32_t dimension_ = 0;
  std::uint32_t classes_ = 0;
};

// `l2_normalize` is off by default; raw activations are compared.
Embedding embed_audio(const AudioEmbedder& model, const MelPatch& audio,
                      bool l2_normalize = false);

// Euclidean distance accumulated in double. Throws ShapeError on a length
// mismatch.
double distance(const Embedding& a, const Embedding& b);
double distance(std::span<const float> a, std::span<const float> b);

struct LabeledClip {
  MelPatch audio;
  int class_id = 0;
};

std::vector<LabeledClip> load_labeled_clips(const LabeledClipManifest& manifest);

struct EmbedderTrainConfig {
  EmbedderConfig model;
  std::size_t steps = 300;
  float lr = 0.01f;
  float momentum = 0.9f;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
};

// Per class, clips at rank % 10 == 9 are held out.
struct ClipSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};
ClipSplit split_clips(std::span<const LabeledClip> clips);

struct EmbedderTrainResult {
  AudioEmbedder model;
  std::vector<double> losses;
  double heldout_accuracy = 0.0;
  std::size_t heldout_count = 0;
  double seconds = 0.0;
};

// Throws PreconditionError unless at least two classes are present and
// every configured class has at least ten clips; TrainingError on a
// non-finite loss.
EmbedderTrainResult train_embedder(std::span<const LabeledClip> clips,
                                   const EmbedderTrainConfig& config);

double classification_accuracy(const AudioEmbedder& model,
                               std::span<const LabeledClip> clips,
                               std::span<const std::size_t> which);

}  // namespace brushwork

#endif  // BRUSHWORK_EMBEDDER_H_
