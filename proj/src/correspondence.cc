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

#include "brushwork/correspondence.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "brushwork/errors.h"
#include "brushwork/layers.h"
#include "brushwork/ops.h"

namespace brushwork {
namespace {

constexpr std::size_t kEncodeBatch = 16;

Sequential build_branch(const BranchConfig& branch, std::uint32_t projection) {
  if (branch.channels.empty()) throw ValidationError("branch needs at least one block");
  std::vector<LayerSpec> specs;
  append_conv_blocks(specs, branch, true);
  specs.push_back(LayerSpec::global_avg_pool());
  specs.push_back(LayerSpec::dense(branch.channels.back(), projection));
  return Sequential(specs);
}

Sequential build_head(std::uint32_t projection, std::uint32_t hidden) {
  const LayerSpec specs[] = {LayerSpec::dense(2 * projection, hidden),
                             LayerSpec::relu(), LayerSpec::dense(hidden, 2)};
  return Sequential(specs);
}

// Output width of the last dense layer, or 0 when the stack does not end
// in one.
std::uint32_t output_width(const Sequential& s) {
  if (s.size() == 0) return 0;
  const LayerSpec& last = s.layer(s.size() - 1).spec();
  return last.kind == LayerKind::kDense ? last.out : 0;
}

std::size_t random_start(const CatalogTrack& track, Rng& rng) {
  return static_cast<std::size_t>(
      rng.below(track.audio.samples.size() - kClipSamples + 1));
}

MelPatch chunk_mel(const CatalogTrack& track, std::size_t start, Rng* augment) {
  AudioClip chunk = slice(track.audio, start, kClipSamples);
  if (augment) chunk = augment_audio(chunk, *augment);
  return mel_patch(chunk);
}

std::vector<std::size_t> negative_candidates(const Catalog& catalog,
                                             std::span<const std::size_t> pool,
                                             std::size_t anchor) {
  std::vector<std::size_t> out;
  for (std::size_t t : pool) {
    if (t != anchor && catalog.tracks[t].album_id != catalog.tracks[anchor].album_id) {
      out.push_back(t);
    }
  }
  return out;
}

// Encodes in fixed-size batches so memory stays bounded.
template <typename Item, typename MakeBatch, typename Encode>
Tensor encode_all(const std::vector<Item>& items, MakeBatch make_batch,
                  Encode encode, std::size_t width) {
  Tensor out({items.size(), width});
  for (std::size_t begin = 0; begin < items.size(); begin += kEncodeBatch) {
    const std::size_t end = std::min(items.size(), begin + kEncodeBatch);
    const Tensor points = encode(make_batch(begin, end));
    std::copy(points.data(), points.data() + points.size(),
              out.data() + begin * width);
  }
  return out;
}

}  // namespace

CorrespondenceModel::CorrespondenceModel(const CorrespondenceConfig& config)
    : CorrespondenceModel(build_branch(config.image, config.projection),
                          build_branch(config.audio, config.projection),
                          build_head(config.projection, config.hidden)) {}

CorrespondenceModel::CorrespondenceModel(Sequential image, Sequential audio,
                                         Sequential head)
    : image_(std::move(image)), audio_(std::move(audio)), head_(std::move(head)) {
  projection_ = output_width(image_);
  if (projection_ == 0 || output_width(audio_) != projection_ || head_.size() == 0 ||
      head_.layer(0).spec().kind != LayerKind::kDense ||
      head_.layer(0).spec().in != 2 * projection_ || output_width(head_) != 2) {
    throw CorruptionError("inconsistent correspondence model layout");
  }
}

void CorrespondenceModel::initialize(Rng& rng) {
  Rng image_rng = rng.fork(1);
  Rng audio_rng = rng.fork(2);
  Rng head_rng = rng.fork(3);
  image_.initialize(image_rng);
  audio_.initialize(audio_rng);
  head_.initialize(head_rng);
}

Tensor CorrespondenceModel::forward(const Tensor& images, const Tensor& mels) {
  if (images.rank() != 4 || mels.rank() != 4 || images.dim(0) != mels.dim(0)) {
    throw ShapeError("forward expects matching [N,H,W,C] image and mel batches");
  }
  const Tensor image_points = image_.forward(images);
  const Tensor audio_points = audio_.forward(mels);
  return head_.forward(concat_features(image_points, audio_points));
}

void CorrespondenceModel::backward(const Tensor& logits_grad) {
  const Tensor grad = head_.backward(logits_grad);
  auto [image_grad, audio_grad] = split_features(grad, projection_);
  image_.backward(image_grad, false);
  audio_.backward(audio_grad, false);
}

Tensor CorrespondenceModel::logits(const Tensor& images, const Tensor& mels) const {
  if (images.rank() != 4 || mels.rank() != 4 || images.dim(0) != mels.dim(0)) {
    throw ShapeError("logits expects matching [N,H,W,C] image and mel batches");
  }
  return head_logits(encode_images(images), encode_audio(mels));
}

Tensor CorrespondenceModel::encode_images(const Tensor& images) const {
  return image_.infer(images);
}

Tensor CorrespondenceModel::encode_audio(const Tensor& mels) const {
  return audio_.infer(mels);
}

Tensor CorrespondenceModel::head_logits(const Tensor& image_points,
                                        const Tensor& audio_points) const {
  return head_.infer(concat_features(image_points, audio_points));
}

std::vector<Parameter*> CorrespondenceModel::parameters() {
  std::vector<Parameter*> out = image_.parameters();
  for (Parameter* p : audio_.parameters()) out.push_back(p);
  for (Parameter* p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> CorrespondenceModel::parameters() const {
  std::vector<const Parameter*> out = image_.parameters();
  for (const Parameter* p : audio_.parameters()) out.push_back(p);
  for (const Parameter* p : head_.parameters()) out.push_back(p);
  return out;
}

std::uint64_t CorrespondenceModel::hash() const { return parameters_hash(parameters()); }

Checkpoint CorrespondenceModel::to_checkpoint() const {
  const Sequential* groups[] = {&image_, &audio_, &head_};
  return pack_checkpoint(ModelKind::kCorrespondence, groups);
}

CorrespondenceModel CorrespondenceModel::from_checkpoint(const Checkpoint& checkpoint) {
  std::vector<Sequential> s = unpack_checkpoint(checkpoint, ModelKind::kCorrespondence, 3);
  return CorrespondenceModel(std::move(s[0]), std::move(s[1]), std::move(s[2]));
}

void CorrespondenceModel::save(const std::filesystem::path& path) const {
  write_file(path, serialize_checkpoint(to_checkpoint()));
}

CorrespondenceModel CorrespondenceModel::load(const std::filesystem::path& path) {
  return from_checkpoint(parse_checkpoint(read_file(path)));
}

double dissimilarity(const Tensor& logits, std::size_t row) {
  if (logits.rank() != 2 || logits.dim(1) != 2 || row >= logits.dim(0)) {
    throw ShapeError("dissimilarity expects [N,2] logits");
  }
  const double l0 = logits[row * 2];
  const double l1 = logits[row * 2 + 1];
  return 1.0 / (1.0 + std::exp(l0 - l1));
}

double score_pair(const CorrespondenceModel& model, const ImageTensor& image,
                  const MelPatch& audio) {
  return dissimilarity(model.logits(image_batch(image), mel_batch(audio)), 0);
}

Catalog load_catalog(const LibraryManifest& manifest) {
  Catalog catalog;
  catalog.tracks.reserve(manifest.tracks.size());
  for (const TrackEntry& t : manifest.tracks) {
    CatalogTrack track;
    track.track_id = t.track_id;
    track.album_id = t.album_id;
    track.class_id = t.class_id.value_or(-1);
    track.audio = load_audio(t.audio_path, kSampleRate);
    track.artwork = load_image(t.artwork_path);
    catalog.tracks.push_back(std::move(track));
  }
  return catalog;
}

TrackSplit split_tracks(const Catalog& catalog) {
  std::vector<std::size_t> order(catalog.tracks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return catalog.tracks[a].track_id < catalog.tracks[b].track_id;
  });
  TrackSplit split;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    (rank % 10 == 9 ? split.heldout : split.train).push_back(order[rank]);
  }
  return split;
}

std::vector<PairSample> sample_pairs(const Catalog& catalog,
                                     std::span<const std::size_t> pool,
                                     std::size_t batch_size, Rng& rng, bool augment) {
  if (pool.size() < 2) throw PreconditionError("pair sampling needs at least two tracks");
  if (batch_size == 0 || batch_size % 2 != 0) {
    throw PreconditionError("batch size must be a positive even number");
  }
  for (std::size_t t : pool) {
    if (t >= catalog.tracks.size()) throw PreconditionError("track index out of range");
    if (catalog.tracks[t].audio.samples.size() < kClipSamples) {
      throw PreconditionError("track '" + catalog.tracks[t].track_id +
                              "' has less than 4 s of audio");
    }
  }
  std::vector<PairSample> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size / 2; ++i) {
    const std::size_t anchor = pool[rng.below(pool.size())];
    const std::vector<std::size_t> others = negative_candidates(catalog, pool, anchor);
    if (others.empty()) {
      throw PreconditionError("track '" + catalog.tracks[anchor].track_id +
                              "' has no negative outside its album");
    }
    const std::size_t negative = others[rng.below(others.size())];
    for (int label = 0; label < 2; ++label) {
      const std::size_t source = label == 0 ? anchor : negative;
      PairSample s;
      s.label = label;
      s.image_track = anchor;
      s.audio_track = source;
      s.audio_start = random_start(catalog.tracks[source], rng);
      const ImageTensor& art = catalog.tracks[anchor].artwork;
      s.image = augment ? augment_image(art, rng) : art;
      s.audio = chunk_mel(catalog.tracks[source], s.audio_start, augment ? &rng : nullptr);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<PairSample> sample_pairs(const Catalog& catalog, std::size_t batch_size,
                                     Rng& rng) {
  std::vector<std::size_t> pool(catalog.tracks.size());
  std::iota(pool.begin(), pool.end(), 0);
  return sample_pairs(catalog, pool, batch_size, rng);
}

double train_step(CorrespondenceModel& model, std::span<const PairSample> batch,
                  float lr, float momentum) {
  std::vector<const ImageTensor*> images;
  std::vector<const MelPatch*> mels;
  std::vector<int> labels;
  for (const PairSample& s : batch) {
    images.push_back(&s.image);
    mels.push_back(&s.audio);
    labels.push_back(s.label);
  }
  const Tensor logits = model.forward(image_batch(images), mel_batch(mels));
  const LossResult loss = softmax_cross_entropy(logits, labels);
  model.backward(loss.logits_grad);
  std::vector<Parameter*> params = model.parameters();
  sgd_step(params, lr, momentum);
  return loss.loss;
}

std::vector<EvalPair> make_eval_pairs(const Catalog& catalog,
                                      std::span<const std::size_t> anchors,
                                      std::size_t count, Rng& rng) {
  if (anchors.empty()) throw PreconditionError("evaluation needs anchor tracks");
  std::vector<std::size_t> all(catalog.tracks.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<EvalPair> out;
  for (std::size_t i = 0; i < count / 2; ++i) {
    const std::size_t anchor = anchors[rng.below(anchors.size())];
    const std::vector<std::size_t> others = negative_candidates(catalog, all, anchor);
    if (others.empty()) throw PreconditionError("no negative track outside the album");
    const std::size_t negative = others[rng.below(others.size())];
    out.push_back({anchor, anchor, random_start(catalog.tracks[anchor], rng), 0});
    out.push_back({anchor, negative, random_start(catalog.tracks[negative], rng), 1});
  }
  return out;
}

PairEvaluation evaluate_pairs(const CorrespondenceModel& model, const Catalog& catalog,
                              std::span<const EvalPair> pairs) {
  PairEvaluation ev;
  if (pairs.empty()) return ev;
  const std::size_t width = model.projection();

  std::map<std::size_t, std::size_t> image_slot;
  std::vector<std::size_t> image_tracks;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> audio_slot;
  std::vector<std::pair<std::size_t, std::size_t>> audio_chunks;
  for (const EvalPair& p : pairs) {
    if (image_slot.emplace(p.image_track, image_tracks.size()).second) {
      image_tracks.push_back(p.image_track);
    }
    const auto key = std::make_pair(p.audio_track, p.audio_start);
    if (audio_slot.emplace(key, audio_chunks.size()).second) audio_chunks.push_back(key);
  }

  const Tensor image_points = encode_all(
      image_tracks,
      [&](std::size_t b, std::size_t e) {
        std::vector<const ImageTensor*> batch;
        for (std::size_t i = b; i < e; ++i) batch.push_back(&catalog.tracks[image_tracks[i]].artwork);
        return image_batch(batch);
      },
      [&](const Tensor& t) { return model.encode_images(t); }, width);
  const Tensor audio_points = encode_all(
      audio_chunks,
      [&](std::size_t b, std::size_t e) {
        std::vector<MelPatch> patches;
        for (std::size_t i = b; i < e; ++i) {
          patches.push_back(chunk_mel(catalog.tracks[audio_chunks[i].first],
                                      audio_chunks[i].second, nullptr));
        }
        std::vector<const MelPatch*> ptrs;
        for (const MelPatch& m : patches) ptrs.push_back(&m);
        return mel_batch(ptrs);
      },
      [&](const Tensor& t) { return model.encode_audio(t); }, width);

  Tensor left({pairs.size(), width});
  Tensor right({pairs.size(), width});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t is = image_slot.at(pairs[i].image_track);
    const std::size_t as = audio_slot.at({pairs[i].audio_track, pairs[i].audio_start});
    std::copy_n(image_points.data() + is * width, width, left.data() + i * width);
    std::copy_n(audio_points.data() + as * width, width, right.data() + i * width);
  }
  const Tensor logits = model.head_logits(left, right);

  std::size_t correct = 0, pos_correct = 0, cross_correct = 0, same_correct = 0;
  double pos_score = 0.0, neg_score = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const EvalPair& p = pairs[i];
    const double score = dissimilarity(logits, i);
    const bool ok = p.label == 0 ? score < 0.5 : score >= 0.5;
    correct += ok;
    if (p.label == 0) {
      ++ev.positives;
      pos_correct += ok;
      pos_score += score;
      continue;
    }
    neg_score += score;
    const int a = catalog.tracks[p.image_track].class_id;
    const int b = catalog.tracks[p.audio_track].class_id;
    if (a >= 0 && a == b) {
      ++ev.same_class_negatives;
      same_correct += ok;
    } else {
      ++ev.cross_class_negatives;
      cross_correct += ok;
    }
  }
  const std::size_t negatives = ev.cross_class_negatives + ev.same_class_negatives;
  auto ratio = [](std::size_t n, std::size_t d) {
    return d == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(d);
  };
  ev.pairs = pairs.size();
  ev.accuracy = ratio(correct, ev.pairs);
  ev.positive_accuracy = ratio(pos_correct, ev.positives);
  ev.cross_class_accuracy =
      ratio(pos_correct + cross_correct, ev.positives + ev.cross_class_negatives);
  ev.cross_class_negative_accuracy = ratio(cross_correct, ev.cross_class_negatives);
  ev.balanced_cross_class_accuracy =
      0.5 * (ev.positive_accuracy + ev.cross_class_negative_accuracy);
  ev.same_class_negative_accuracy = ratio(same_correct, ev.same_class_negatives);
  ev.mean_positive_score = ev.positives ? pos_score / ev.positives : 0.0;
  ev.mean_negative_score = negatives ? neg_score / negatives : 0.0;
  return ev;
}

PairEvaluation evaluate_heldout(const CorrespondenceModel& model, const Catalog& catalog,
                                std::size_t count, std::uint64_t seed) {
  const TrackSplit split = split_tracks(catalog);
  if (split.heldout.empty()) throw PreconditionError("catalog too small for a held-out split");
  Rng rng = Rng(seed).fork(3);
  const std::vector<EvalPair> pairs = make_eval_pairs(catalog, split.heldout, count, rng);
  return evaluate_pairs(model, catalog, pairs);
}

CorrespondenceTrainResult train_correspondence(const Catalog& catalog,
                                               const CorrespondenceTrainConfig& config) {
  if (config.steps == 0) throw PreconditionError("training needs at least one step");
  retain_freed_memory();
  const auto started = std::chrono::steady_clock::now();
  const TrackSplit split = split_tracks(catalog);

  Rng root(config.seed);
  CorrespondenceTrainResult result{CorrespondenceModel(config.model), {}, {}, 0.0};
  Rng init = root.fork(1);
  result.model.initialize(init);
  Rng sampler = root.fork(2);
  MetricsLog metrics;
  if (!config.metrics_path.empty()) metrics = MetricsLog(config.metrics_path);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const std::vector<PairSample> batch =
        sample_pairs(catalog, split.train, config.batch_size, sampler, config.augment);
    const double loss = train_step(result.model, batch, config.lr, config.momentum);
    if (!std::isfinite(loss)) {
      throw TrainingError("loss became non-finite at step " + std::to_string(step));
    }
    StepMetrics m{step, loss, std::nullopt};
    const bool eval_now = config.eval_every != 0 && !split.heldout.empty() &&
                          (step % config.eval_every == 0 || step == config.steps);
    if (eval_now) {
      m.heldout_accuracy =
          evaluate_heldout(result.model, catalog, config.eval_pairs, config.seed).accuracy;
      spdlog::info("step {} loss {:.4f} heldout {:.3f}", step, loss, *m.heldout_accuracy);
    }
    nlohmann::json line = {{"step", step}, {"loss", loss}};
    if (m.heldout_accuracy) line["heldout_accuracy"] = *m.heldout_accuracy;
    metrics.write(line.dump());
    result.log.push_back(m);
  }
  if (!split.heldout.empty()) {
    result.heldout = evaluate_heldout(result.model, catalog, config.eval_pairs, config.seed);
  }
  if (!config.checkpoint_path.empty()) result.model.save(config.checkpoint_path);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace brushwork
