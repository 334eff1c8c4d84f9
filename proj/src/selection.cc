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

#include "brushwork/selection.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "brushwork/errors.h"

namespace brushwork {
namespace {

constexpr std::size_t kEncodeBatch = 16;

Tensor gather_rows(const Tensor& m, std::size_t row, std::size_t count) {
  const std::size_t w = m.dim(1);
  Tensor out({count, w});
  for (std::size_t i = 0; i < count; ++i) {
    std::copy_n(m.data() + row * w, w, out.data() + i * w);
  }
  return out;
}

std::vector<double> head_scores(const CorrespondenceModel& model, const Tensor& image_point,
                                const Tensor& audio_points) {
  const std::size_t n = audio_points.dim(0);
  const Tensor logits = model.head_logits(gather_rows(image_point, 0, n), audio_points);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = dissimilarity(logits, i);
  return out;
}

}  // namespace

std::size_t survivor_count(std::size_t total, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const double want = std::ceil(fraction * static_cast<double>(total) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(want, 1.0)), 1,
                                 std::max<std::size_t>(total, 1));
}

std::vector<std::size_t> StageOneResult::positions() const {
  std::vector<std::size_t> out;
  out.reserve(survivors.size());
  for (const ScoredChunk& s : survivors) out.push_back(s.position);
  return out;
}

StageOneResult select_survivors(std::span<const double> scores, double fraction,
                                std::string painting_id) {
  if (scores.empty()) throw EmptyIndexError("stage 1 needs a non-empty index");
  const std::size_t keep = survivor_count(scores.size(), fraction);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
                    });
  StageOneResult out;
  out.painting_id = std::move(painting_id);
  out.fraction = fraction;
  out.total = scores.size();
  for (std::size_t i = 0; i < keep; ++i) out.survivors.push_back({order[i], scores[order[i]]});
  return out;
}

StageOneResult stage1_filter(const CorrespondenceModel& model, const ImageTensor& painting,
                             const EmbeddingIndex& index, const ChunkMelSource& mels,
                             double fraction, std::string painting_id) {
  if (index.empty()) throw EmptyIndexError("stage 1 needs a non-empty index");
  survivor_count(index.size(), fraction);
  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    scores[i] = score_pair(model, painting, mels(index.record(i)));
  }
  return select_survivors(scores, fraction, std::move(painting_id));
}

Stage1Scorer::Stage1Scorer(const CorrespondenceModel& model, const EmbeddingIndex& index,
                           const ChunkMelSource& mels)
    : model_(model), model_hash_(model.hash()), total_(index.size()) {
  if (index.empty()) throw EmptyIndexError("stage 1 needs a non-empty index");
  const std::size_t w = model.projection();
  audio_points_ = Tensor({total_, w});
  for (std::size_t begin = 0; begin < total_; begin += kEncodeBatch) {
    const std::size_t end = std::min(total_, begin + kEncodeBatch);
    std::vector<MelPatch> patches;
    for (std::size_t i = begin; i < end; ++i) patches.push_back(mels(index.record(i)));
    std::vector<const MelPatch*> ptrs;
    for (const MelPatch& m : patches) ptrs.push_back(&m);
    const Tensor p = model.encode_audio(mel_batch(ptrs));
    std::copy(p.data(), p.data() + p.size(), audio_points_.data() + begin * w);
  }
}

const std::vector<double>& Stage1Scorer::scores(const ImageTensor& painting) {
  const auto key = std::make_pair(content_hash(painting), model_hash_);
  auto it = cache_.find(key);
  if (it != cache_.end()) {
    ++hits_;
    return it->second;
  }
  const Tensor point = model_.encode_images(image_batch(painting));
  return cache_.emplace(key, head_scores(model_, point, audio_points_)).first->second;
}

StageOneResult Stage1Scorer::filter(const ImageTensor& painting, double fraction,
                                    std::string painting_id) {
  survivor_count(total_, fraction);
  return select_survivors(scores(painting), fraction, std::move(painting_id));
}

std::string to_json(const MatchEvent& e) {
  nlohmann::json j = {{"track_id", e.chunk.track_id},
                      {"chunk_index", e.chunk.chunk_index},
                      {"start_time", e.start_time},
                      {"stage1_score", e.stage1_score},
                      {"stage2_distance", e.stage2_distance},
                      {"timestamp", e.timestamp}};
  if (e.painting_id) j["painting_id"] = *e.painting_id;
  return j.dump();
}

MatchEvent stage2_retrieve(const Embedding& brush, const EmbeddingIndex& index,
                           const StageOneResult& stage1, double timestamp) {
  if (stage1.survivors.empty()) throw PreconditionError("stage 1 left no survivors");
  const std::vector<Neighbor> hit = nearest(index, brush.vector, 1, stage1.positions());
  const ChunkRecord& rec = index.record(hit[0].position);
  double s1 = 0.0;
  for (const ScoredChunk& s : stage1.survivors) {
    if (s.position == hit[0].position) s1 = s.score;
  }
  return MatchEvent{rec.key, rec.start_time(), s1, hit[0].distance, timestamp, std::nullopt};
}

MatchEvent stage2_retrieve(const AudioEmbedder& embedder, const EmbeddingIndex& index,
                           const StageOneResult& stage1, const MelPatch& brush_audio,
                           double timestamp) {
  return stage2_retrieve(embed_audio(embedder, brush_audio), index, stage1, timestamp);
}

CongruityState congruity_step(CongruityState state, double score) {
  if (!(state.alpha > 0.0 && state.alpha <= 1.0)) {
    throw ValidationError("alpha must be in (0, 1]");
  }
  state.raw = std::clamp(1.0 - score, 0.0, 1.0);
  state.smoothed = state.started
                       ? state.alpha * state.raw + (1.0 - state.alpha) * state.smoothed
                       : state.raw;
  state.started = true;
  return state;
}

CongruityState congruity_update(CongruityState state, const CorrespondenceModel& model,
                                const ImageTensor& painting, const MelPatch& music) {
  return congruity_step(state, score_pair(model, painting, music));
}

PaintingLibrary::PaintingLibrary(const CorrespondenceModel& model, std::vector<std::string> ids,
                                 const std::vector<ImageTensor>& images)
    : ids_(std::move(ids)) {
  if (ids_.size() != images.size()) throw PreconditionError("painting ids and images differ");
  const std::size_t w = model.projection();
  points_ = Tensor({images.size(), w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Tensor p = model.encode_images(image_batch(images[i]));
    std::copy_n(p.data(), w, points_.data() + i * w);
  }
}

std::pair<std::string, double> PaintingLibrary::best(const CorrespondenceModel& model,
                                                     const MelPatch& music) const {
  if (ids_.empty()) throw EmptyIndexError("painting library is empty");
  const Tensor audio = model.encode_audio(mel_batch(music));
  const Tensor logits = model.head_logits(points_, gather_rows(audio, 0, ids_.size()));
  std::size_t best = 0;
  double best_score = dissimilarity(logits, 0);
  for (std::size_t i = 1; i < ids_.size(); ++i) {
    const double s = dissimilarity(logits, i);
    if (s < best_score || (s == best_score && ids_[i] < ids_[best])) {
      best = i;
      best_score = s;
    }
  }
  return {ids_[best], best_score};
}

}  // namespace brushwork
