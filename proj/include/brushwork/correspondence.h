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

#ifndef BRUSHWORK_CORRESPONDENCE_H_
#define BRUSHWORK_CORRESPONDENCE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brushwork/audio_frontend.h"
#include "brushwork/image_frontend.h"
#include "brushwork/manifest.h"
#include "brushwork/model_common.h"
#include "brushwork/network.h"
#include "brushwork/rng.h"
#include "brushwork/tensor.h"

namespace brushwork {

struct CorrespondenceConfig {
  BranchConfig image{{16, 32, 64, 128}, 3, 3, 2};
  BranchConfig audio{{16, 32, 64, 128}, 1, 3, 2};
  std::uint32_t projection = 512;
  std::uint32_t hidden = 128;
};

// Image and audio branches each map to a `projection`-wide point; the head
// maps their concatenation to two logits. Class 1 means "dissimilar".
class CorrespondenceModel {
 public:
  explicit CorrespondenceModel(const CorrespondenceConfig& config = {});

  void initialize(Rng& rng);

  // Training path: records tapes on all three stacks and returns logits
  // [N, 2]. images [N,H,W,3], mels [N,bins,frames,1].
  Tensor forward(const Tensor& images, const Tensor& mels);
  void backward(const Tensor& logits_grad);

  Tensor logits(const Tensor& images, const Tensor& mels) const;
  Tensor encode_images(const Tensor& images) const;
  Tensor encode_audio(const Tensor& mels) const;
  Tensor head_logits(const Tensor& image_points, const Tensor& audio_points) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::uint64_t hash() const;
  std::uint32_t projection() const { return projection_; }

  Sequential& image_branch() { return image_; }
  Sequential& audio_branch() { return audio_; }
  Sequential& head() { return head_; }

  Checkpoint to_checkpoint() const;
  static CorrespondenceModel from_checkpoint(const Checkpoint& checkpoint);
  void save(const std::filesystem::path& path) const;
  static CorrespondenceModel load(const std::filesystem::path& path);

 private:
  CorrespondenceModel(Sequential image, Sequential audio, Sequential head);

  Sequential image_;
  Sequential audio_;
  Sequential head_;
  std::uint32_t projection_ = 0;
};

// Softmax probability of class 1 for row `row` of a [N, 2] logits tensor.
double dissimilarity(const Tensor& logits, std::size_t row);

// Score in [0, 1]; 0 is a strong association.
double score_pair(const CorrespondenceModel& model, const ImageTensor& image,
                  const MelPatch& audio);

struct CatalogTrack {
  std::string track_id;
  std::string album_id;
  int class_id = -1;
  AudioClip audio;
  ImageTensor artwork;
};

struct Catalog {
  std::vector<CatalogTrack> tracks;
};

Catalog load_catalog(const LibraryManifest& manifest);

// Track indices sorted by id; every tenth (rank % 10 == 9) is held out.
struct TrackSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};
TrackSplit split_tracks(const Catalog& catalog);

struct PairSample {
  ImageTensor image;
  MelPatch audio;
  int label = 0;  // 0 corresponding, 1 not
  std::size_t image_track = 0;
  std::size_t audio_track = 0;
  std::size_t audio_start = 0;  // samples
};

// Draws batch_size / 2 anchors from `pool`. Each anchor yields a positive
// (a random 4 s chunk of its own audio) followed by a negative (a random
// chunk of a pool track from another album). Throws PreconditionError for
// fewer than two tracks, an odd batch, short audio or an anchor with no
// eligible negative.
std::vector<PairSample> sample_pairs(const Catalog& catalog,
                                     std::span<const std::size_t> pool,
                                     std::size_t batch_size, Rng& rng,
                                     bool augment = true);
std::vector<PairSample> sample_pairs(const Catalog& catalog,
                                     std::size_t batch_size, Rng& rng);

// One SGD step over the batch; returns the mean loss before the update.
double train_step(CorrespondenceModel& model, std::span<const PairSample> batch,
                  float lr, float momentum);

struct EvalPair {
  std::size_t image_track = 0;
  std::size_t audio_track = 0;
  std::size_t audio_start = 0;
  int label = 0;
};

// Balanced pairs anchored on `anchors`. Negatives come from any other
// catalog track outside the anchor's album.
std::vector<EvalPair> make_eval_pairs(const Catalog& catalog,
                                      std::span<const std::size_t> anchors,
                                      std::size_t count, Rng& rng);

struct PairEvaluation {
  std::size_t pairs = 0;
  std::size_t positives = 0;
  std::size_t cross_class_negatives = 0;
  std::size_t same_class_negatives = 0;
  double accuracy = 0.0;
  double positive_accuracy = 0.0;
  // Accuracy over positives plus negatives whose class differs.
  double cross_class_accuracy = 0.0;
  double cross_class_negative_accuracy = 0.0;
  // Mean of positive and cross-class negative accuracy; a constant
  // predictor scores 0.5.
  double balanced_cross_class_accuracy = 0.0;
  double same_class_negative_accuracy = 0.0;
  double mean_positive_score = 0.0;
  double mean_negative_score = 0.0;
};

PairEvaluation evaluate_pairs(const CorrespondenceModel& model,
                              const Catalog& catalog,
                              std::span<const EvalPair> pairs);

struct CorrespondenceTrainConfig {
  CorrespondenceConfig model;
  std::size_t steps = 400;
  float lr = 0.01f;
  float momentum = 0.9f;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  bool augment = true;
  std::size_t eval_every = 100;  // 0 disables periodic evaluation
  std::size_t eval_pairs = 200;
  std::filesystem::path checkpoint_path;  // empty: not saved
  std::filesystem::path metrics_path;     // empty: no log file
};

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  std::optional<double> heldout_accuracy;
};

struct CorrespondenceTrainResult {
  CorrespondenceModel model;
  std::vector<StepMetrics> log;
  PairEvaluation heldout;
  double seconds = 0.0;
};

// Throws TrainingError naming the step when the loss stops being finite.
CorrespondenceTrainResult train_correspondence(const Catalog& catalog,
                                               const CorrespondenceTrainConfig& config);

// Held-out evaluation used by training and the eval command.
PairEvaluation evaluate_heldout(const CorrespondenceModel& model,
                                const Catalog& catalog, std::size_t count,
                                std::uint64_t seed);

}  // namespace brushwork

#endif  // BRUSHWORK_CORRESPONDENCE_H_
