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

#ifndef BRUSHWORK_SELECTION_H_
#define BRUSHWORK_SELECTION_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brushwork/correspondence.h"
#include "brushwork/embedder.h"
#include "brushwork/embedding_index.h"

namespace brushwork {

// max(1, ceil(fraction * total)); the product is nudged down by 1e-9 so
// that e.g. 0.01 * 1000 yields 10, not 11. Throws ValidationError unless
// 0 < fraction <= 1.
std::size_t survivor_count(std::size_t total, double fraction);

struct ScoredChunk {
  std::size_t position = 0;  // into the index
  double score = 0.0;
};

struct StageOneResult {
  std::string painting_id;
  double fraction = 0.0;
  std::size_t total = 0;
  std::vector<ScoredChunk> survivors;  // ascending score, ties in key order
  std::vector<std::size_t> positions() const;
};

// Mel patch for a library chunk.
using ChunkMelSource = std::function<MelPatch(const ChunkRecord&)>;

// Keeps the lowest-scoring chunks. Ties go to the smaller position.
StageOneResult select_survivors(std::span<const double> scores, double fraction,
                                std::string painting_id = {});

// Scores every chunk with score_pair. Throws EmptyIndexError.
StageOneResult stage1_filter(const CorrespondenceModel& model, const ImageTensor& painting,
                             const EmbeddingIndex& index, const ChunkMelSource& mels,
                             double fraction, std::string painting_id = {});

// Same result as stage1_filter, but the audio branch runs once per chunk at
// construction and per-painting scores are cached by painting content hash
// and model hash.
class Stage1Scorer {
 public:
  Stage1Scorer(const CorrespondenceModel& model, const EmbeddingIndex& index,
               const ChunkMelSource& mels);

  const std::vector<double>& scores(const ImageTensor& painting);
  StageOneResult filter(const ImageTensor& painting, double fraction,
                        std::string painting_id = {});
  std::size_t cache_hits() const { return hits_; }
  std::size_t cache_entries() const { return cache_.size(); }

 private:
  const CorrespondenceModel& model_;
  std::uint64_t model_hash_;
  std::size_t total_;
  Tensor audio_points_;  // [chunks, projection]
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::vector<double>> cache_;
  std::size_t hits_ = 0;
};

struct MatchEvent {
  ChunkKey chunk;
  double start_time = 0.0;
  double stage1_score = 0.0;
  double stage2_distance = 0.0;
  double timestamp = 0.0;
  std::optional<std::string> painting_id;
};

std::string to_json(const MatchEvent& event);

// Nearest survivor to the brush audio embedding. Throws PreconditionError
// when there are no survivors.
MatchEvent stage2_retrieve(const AudioEmbedder& embedder, const EmbeddingIndex& index,
                           const StageOneResult& stage1, const MelPatch& brush_audio,
                           double timestamp = 0.0);
MatchEvent stage2_retrieve(const Embedding& brush, const EmbeddingIndex& index,
                           const StageOneResult& stage1, double timestamp = 0.0);

struct CongruityState {
  double raw = 0.0;
  double smoothed = 0.0;
  double alpha = 0.3;
  bool started = false;
};

inline constexpr double kDefaultCongruityAlpha = 0.3;

// raw = 1 - score; the first update sets smoothed = raw. Throws
// ValidationError unless 0 < alpha <= 1.
CongruityState congruity_step(CongruityState state, double score);
CongruityState congruity_update(CongruityState state, const CorrespondenceModel& model,
                                const ImageTensor& painting, const MelPatch& music);

// Painting library scored against live music, for the reverse direction.
class PaintingLibrary {
 public:
  PaintingLibrary() = default;
  PaintingLibrary(const CorrespondenceModel& model, std::vector<std::string> ids,
                  const std::vector<ImageTensor>& images);

  bool empty() const { return ids_.empty(); }
  // Lowest-scoring painting; ties go to the smaller id.
  std::pair<std::string, double> best(const CorrespondenceModel& model,
                                      const MelPatch& music) const;

 private:
  std::vector<std::string> ids_;
  Tensor points_;  // [paintings, projection]
};

}  // namespace brushwork

#endif  // BRUSHWORK_SELECTION_H_
