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

#include <doctest.h>

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "brushwork/errors.h"
#include "brushwork/selection.h"
#include "toy_fixture.h"

namespace brushwork {
namespace {

using testing::small_correspondence_config;

struct Library {
  std::map<std::string, AudioClip> audio;
  EmbeddingIndex index;
  AudioEmbedder embedder{EmbedderConfig{{{4, 8, 8, 16}, 1, 3, 2}, 3}};

  MelPatch mel(const ChunkRecord& r) const {
    return mel_patch(slice(audio.at(r.key.track_id), r.key.chunk_index * kClipSamples,
                           kClipSamples));
  }
};

Library make_library(std::size_t tracks, double seconds, std::uint64_t seed) {
  Library lib;
  Rng init(seed);
  lib.embedder.initialize(init);
  std::vector<IndexSource> sources;
  for (std::size_t i = 0; i < tracks; ++i) {
    Rng rng = Rng(seed).fork(i);
    const std::string id = "track_" + std::to_string(100 + i);
    lib.audio[id] = toy_track_audio(i % 4, 4, seconds, rng);
    sources.push_back({id, lib.audio[id], ""});
  }
  lib.index = build_index(sources, lib.embedder).index;
  return lib;
}

CorrespondenceModel small_model(std::uint64_t seed) {
  CorrespondenceModel m(small_correspondence_config());
  Rng rng(seed);
  m.initialize(rng);
  return m;
}

ImageTensor painting(std::size_t cls, std::uint64_t seed) {
  Rng rng(seed);
  return to_image_tensor(toy_artwork(cls, 4, rng, 64));
}

// ceil(n * num / den) in integers.
std::size_t ceil_ratio(std::size_t n, std::size_t num, std::size_t den) {
  return (n * num + den - 1) / den;
}

}  // namespace

TEST_CASE("survivor count follows max(1, ceil(fN))") {
  const std::pair<double, std::pair<std::size_t, std::size_t>> fractions[] = {
      {0.001, {1, 1000}}, {0.01, {1, 100}}, {0.5, {1, 2}}, {1.0, {1, 1}}};
  for (std::size_t n : {1, 10, 99, 1000}) {
    for (const auto& [f, ratio] : fractions) {
      const std::size_t want = std::max<std::size_t>(1, ceil_ratio(n, ratio.first, ratio.second));
      INFO("N=" << n << " f=" << f);
      CHECK(survivor_count(n, f) == want);
    }
  }
  CHECK(survivor_count(1000, 0.01) == 10);
  CHECK(survivor_count(10, 0.0001) == 1);
  CHECK(survivor_count(1000, 0.05) == 50);
  CHECK_THROWS_AS(survivor_count(10, 0.0), ValidationError);
  CHECK_THROWS_AS(survivor_count(10, 1.5), ValidationError);
  CHECK_THROWS_AS(survivor_count(10, -0.1), ValidationError);
}

TEST_CASE("survivors are the lowest scores with ties in key order") {
  Rng rng(1);
  std::vector<double> scores(1000);
  for (double& s : scores) s = rng.uniform();
  const StageOneResult r = select_survivors(scores, 0.01);
  REQUIRE(r.survivors.size() == 10);
  double worst_kept = 0.0;
  for (const ScoredChunk& s : r.survivors) worst_kept = std::max(worst_kept, s.score);
  const auto kept = r.positions();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::find(kept.begin(), kept.end(), i) == kept.end()) CHECK(scores[i] >= worst_kept);
  }

  const std::vector<double> flat(40, 0.25);
  const StageOneResult f = select_survivors(flat, 0.1);
  CHECK(f.positions() == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(select_survivors(std::vector<double>{}, 0.5), EmptyIndexError);
}

TEST_CASE("cached stage 1 matches per-chunk score_pair") {
  const Library lib = make_library(6, 20.0, 2);
  const CorrespondenceModel model = small_model(3);
  const ChunkMelSource mels = [&](const ChunkRecord& r) { return lib.mel(r); };
  REQUIRE(lib.index.size() == 30);
  const ImageTensor p = painting(1, 4);

  const StageOneResult direct = stage1_filter(model, p, lib.index, mels, 0.2, "p");
  Stage1Scorer scorer(model, lib.index, mels);
  const StageOneResult cached = scorer.filter(p, 0.2, "p");
  REQUIRE(direct.survivors.size() == 6);
  CHECK(cached.positions() == direct.positions());
  for (std::size_t i = 0; i < direct.survivors.size(); ++i) {
    CHECK(cached.survivors[i].score == doctest::Approx(direct.survivors[i].score).epsilon(1e-6));
  }
  CHECK(cached.painting_id == "p");
  CHECK(cached.total == 30);

  CHECK(scorer.cache_hits() == 0);
  scorer.filter(p, 0.5);
  CHECK(scorer.cache_hits() == 1);
  CHECK(scorer.cache_entries() == 1);
  scorer.filter(painting(2, 5), 0.5);
  CHECK(scorer.cache_entries() == 2);

  const EmbeddingIndex empty(16, {});
  CHECK_THROWS_AS(stage1_filter(model, p, empty, mels, 0.1), EmptyIndexError);
}

TEST_CASE("stage 2 picks the nearest survivor") {
  const Library lib = make_library(10, 20.0, 6);
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> scores(lib.index.size());
    for (double& s : scores) s = rng.uniform();
    const StageOneResult s1 = select_survivors(scores, 50.0 / lib.index.size());
    REQUIRE(s1.survivors.size() == 50);
    Rng brush_rng = Rng(8).fork(trial);
    const MelPatch brush = mel_patch(toy_track_audio(trial % 4, 4, 4.0, brush_rng));
    const MatchEvent ev = stage2_retrieve(lib.embedder, lib.index, s1, brush, 1.5);

    const Embedding q = embed_audio(lib.embedder, brush);
    std::size_t best = s1.survivors[0].position;
    for (const ScoredChunk& s : s1.survivors) {
      const double d = distance(q.vector, lib.index.record(s.position).embedding);
      const double bd = distance(q.vector, lib.index.record(best).embedding);
      if (d < bd || (d == bd && s.position < best)) best = s.position;
    }
    CHECK(ev.chunk == lib.index.record(best).key);
    CHECK(ev.stage1_score == scores[best]);
    CHECK(ev.timestamp == 1.5);
    CHECK(ev.start_time == 4.0 * ev.chunk.chunk_index);
  }
}

TEST_CASE("stage 2 singleton and exact-hit cases") {
  const Library lib = make_library(3, 12.0, 9);
  std::vector<double> scores(lib.index.size(), 0.9);
  scores[4] = 0.1;
  const StageOneResult one = select_survivors(scores, 0.01);
  REQUIRE(one.survivors.size() == 1);
  Rng rng(10);
  const MelPatch anything = mel_patch(toy_track_audio(2, 4, 4.0, rng));
  CHECK(stage2_retrieve(lib.embedder, lib.index, one, anything).chunk == lib.index.record(4).key);

  const StageOneResult all = select_survivors(scores, 1.0);
  const MatchEvent hit = stage2_retrieve(lib.embedder, lib.index, all, lib.mel(lib.index.record(7)));
  CHECK(hit.chunk == lib.index.record(7).key);
  CHECK(hit.stage2_distance == 0.0);

  CHECK_THROWS_AS(stage2_retrieve(lib.embedder, lib.index, StageOneResult{}, anything),
                  PreconditionError);
}

TEST_CASE("match events serialize with the documented fields") {
  MatchEvent e{{"track_7", 3}, 12.0, 0.25, 1.5, 9.0, std::nullopt};
  auto j = nlohmann::json::parse(to_json(e));
  CHECK(j["track_id"] == "track_7");
  CHECK(j["chunk_index"] == 3);
  CHECK(j["start_time"] == 12.0);
  CHECK(j["stage1_score"] == 0.25);
  CHECK(j["stage2_distance"] == 1.5);
  CHECK(j["timestamp"] == 9.0);
  CHECK_FALSE(j.contains("painting_id"));
  e.painting_id = "painting_001";
  CHECK(nlohmann::json::parse(to_json(e))["painting_id"] == "painting_001");
}

TEST_CASE("congruity recurrence") {
  CongruityState s;
  s = congruity_step(s, 0.0);
  CHECK(s.raw == 1.0);
  CHECK(s.smoothed == 1.0);
  s = congruity_step(s, 1.0);
  CHECK(s.raw == 0.0);
  CHECK(s.smoothed == doctest::Approx(0.7).epsilon(1e-12));

  CongruityState unit;
  unit.alpha = 1.0;
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    unit = congruity_step(unit, rng.uniform());
    CHECK(unit.smoothed == unit.raw);
  }

  CongruityState t;
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 200; ++i) {
    t = congruity_step(t, rng.uniform());
    lo = std::min(lo, t.raw);
    hi = std::max(hi, t.raw);
    CHECK(t.smoothed >= lo - 1e-12);
    CHECK(t.smoothed <= hi + 1e-12);
  }
  CongruityState bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(congruity_step(bad, 0.5), ValidationError);
}

TEST_CASE("congruity update uses the model score") {
  const CorrespondenceModel model = small_model(12);
  Rng rng(13);
  const ImageTensor p = painting(0, 14);
  const MelPatch m = mel_patch(toy_track_audio(0, 4, 4.0, rng));
  const CongruityState s = congruity_update({}, model, p, m);
  CHECK(s.raw == doctest::Approx(1.0 - score_pair(model, p, m)).epsilon(1e-12));
}

TEST_CASE("painting library returns the lowest-scoring painting") {
  const CorrespondenceModel model = small_model(15);
  std::vector<std::string> ids;
  std::vector<ImageTensor> images;
  for (std::size_t i = 0; i < 6; ++i) {
    ids.push_back("painting_" + std::to_string(i));
    images.push_back(painting(i % 4, 20 + i));
  }
  const PaintingLibrary lib(model, ids, images);
  Rng rng(16);
  for (int trial = 0; trial < 4; ++trial) {
    const MelPatch music = mel_patch(toy_track_audio(trial, 4, 4.0, rng));
    const auto [id, score] = lib.best(model, music);
    std::size_t best = 0;
    double best_score = 2.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      const double s = score_pair(model, images[i], music);
      if (s < best_score) best = i, best_score = s;
    }
    CHECK(id == ids[best]);
    CHECK(score == doctest::Approx(best_score).epsilon(1e-6));
  }
}

}  // namespace brushwork
