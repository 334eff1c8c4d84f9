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
#include <cmath>

#include <nlohmann/json.hpp>

#include "brushwork/errors.h"
#include "brushwork/live_engine.h"
#include "engine_fixture.h"

namespace brushwork {
namespace {

using testing::engine_fixture;
using testing::toy_block;
using testing::toy_canvas;

std::vector<std::string> statuses(const std::vector<EngineEvent>& events) {
  std::vector<std::string> out;
  for (const EngineEvent& e : events) {
    if (e.kind == EventKind::kStatus) out.push_back(e.status);
  }
  return out;
}

std::size_t count_kind(const std::vector<EngineEvent>& events, EventKind kind) {
  return static_cast<std::size_t>(std::count_if(
      events.begin(), events.end(), [&](const EngineEvent& e) { return e.kind == kind; }));
}

// Chunk nearest to `query` among `positions`, with long double distances.
ChunkKey brute_force_match(const EmbeddingIndex& index, std::span<const std::size_t> positions,
                           const std::vector<float>& query) {
  long double best = INFINITY;
  std::size_t best_pos = 0;
  for (std::size_t p : positions) {
    long double d = 0;
    const auto& e = index.record(p).embedding;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const long double diff = static_cast<long double>(e[i]) - query[i];
      d += diff * diff;
    }
    if (d < best || (d == best && p < best_pos)) {
      best = d;
      best_pos = p;
    }
  }
  return index.record(best_pos).key;
}

}  // namespace

TEST_CASE("rolling buffer keeps the latest four seconds") {
  RollingBuffer buf;
  CHECK(buf.capacity() == 64000);
  std::vector<std::vector<float>> blocks;
  for (int b = 0; b < 5; ++b) {
    std::vector<float> block(16000);
    for (std::size_t i = 0; i < block.size(); ++i) block[i] = static_cast<float>(b * 16000 + i);
    blocks.push_back(block);
  }
  for (int b = 0; b < 4; ++b) {
    CHECK_FALSE(buf.full());
    buf.push(blocks[b]);
  }
  CHECK(buf.full());
  CHECK(buf.size() == 64000);
  CHECK(buf.snapshot().front() == 0.0f);
  buf.push(blocks[4]);
  const auto snap = buf.snapshot();
  REQUIRE(snap.size() == 64000);
  CHECK(snap.front() == 16000.0f);
  CHECK(snap.back() == 79999.0f);
  CHECK(buf.total_pushed() == 80000);
  for (std::size_t i = 1; i < snap.size(); ++i) REQUIRE(snap[i] == snap[i - 1] + 1.0f);

  RollingBuffer small(10);
  std::vector<float> big(25);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<float>(i);
  small.push(big);
  CHECK(small.snapshot() == std::vector<float>(big.end() - 10, big.end()));
}

TEST_CASE("session warms up before emitting matches") {
  auto f = engine_fixture(4, 12.0, 1);
  LiveEngine engine({}, f.resources);
  const auto start = engine.log();
  REQUIRE(start.size() == 1);
  CHECK(start[0].sequence == 1);
  CHECK(start[0].status == "session started");

  engine.push_image(toy_canvas(0, 2));
  const AudioClip audio = toy_block(0, 4.0, 3);
  for (int s = 0; s < 3; ++s) {
    engine.push_audio(slice(audio, s * 16000, 16000));
    const auto events = engine.advance(s + 1.0);
    REQUIRE(events.size() == 1);
    CHECK(events[0].status == "warming up");
  }
  engine.push_audio(slice(audio, 48000, 16000));
  const auto events = engine.advance(4.0);
  CHECK(statuses(events) == std::vector<std::string>{"stage1 refresh"});
  CHECK(count_kind(events, EventKind::kMatch) == 1);
  CHECK(engine.status().warm);
}

TEST_CASE("waiting for canvas without an image") {
  auto f = engine_fixture(4, 12.0, 1);
  LiveEngine engine({}, f.resources);
  engine.push_audio(toy_block(1, 4.0, 3));
  const auto events = engine.advance(1.0);
  CHECK(statuses(events) == std::vector<std::string>{"waiting for canvas"});
}

TEST_CASE("crossfeed match equals stage 1 then brute-force stage 2") {
  auto f = engine_fixture(6, 20.0, 4);
  SessionConfig cfg;
  cfg.fraction = 0.2;
  LiveEngine engine(cfg, f.resources);
  for (int trial = 0; trial < 4; ++trial) {
    const ImageTensor canvas = toy_canvas(trial % 4, 10 + trial);
    const AudioClip audio = toy_block((trial + 1) % 4, 4.0, 20 + trial);
    engine.push_image(canvas);
    engine.push_audio(audio);
    const double now = 3.0 * (trial + 1);
    const auto events = engine.advance(now);
    REQUIRE(count_kind(events, EventKind::kMatch) >= 1);
    const EngineEvent& m = events.back();
    REQUIRE(m.kind == EventKind::kMatch);

    const StageOneResult s1 =
        stage1_filter(*f.resources.model, canvas, *f.resources.index, f.resources.mels, 0.2);
    CHECK(s1.survivors.size() == 6);
    const Embedding q = embed_audio(*f.resources.embedder, mel_patch(audio));
    const auto positions = s1.positions();
    CHECK(m.match->chunk == brute_force_match(*f.resources.index, positions, q.vector));
    CHECK(m.match->start_time == doctest::Approx(4.0 * m.match->chunk.chunk_index));
    CHECK(m.timestamp == doctest::Approx(now));
  }
}

TEST_CASE("identical canvas does not trigger a re-filter") {
  auto f = engine_fixture(4, 12.0, 1);
  SessionConfig cfg;
  cfg.image_refresh = 2.0;
  LiveEngine engine(cfg, f.resources);
  engine.push_audio(toy_block(2, 4.0, 5));
  const ImageTensor canvas = toy_canvas(2, 6);
  const ImageAck first = engine.push_image(canvas);
  CHECK(first.changed);
  CHECK(statuses(engine.advance(1.0)) == std::vector<std::string>{"stage1 refresh"});
  const ImageAck second = engine.push_image(canvas);
  CHECK_FALSE(second.changed);
  CHECK(second.hash == first.hash);
  CHECK(statuses(engine.advance(5.0)).empty());

  // A new canvas waits for the refresh interval before re-filtering.
  engine.push_image(toy_canvas(3, 7));
  CHECK(statuses(engine.advance(6.0)) == std::vector<std::string>{"stage1 refresh"});
  engine.push_image(toy_canvas(1, 8));
  CHECK(statuses(engine.advance(7.0)).empty());
  CHECK(statuses(engine.advance(8.0)) == std::vector<std::string>{"stage1 refresh"});
}

TEST_CASE("fraction update resizes the survivor set on the next tick") {
  auto f = engine_fixture(25, 160.0, 9);
  REQUIRE(f.resources.index->size() == 1000);
  LiveEngine engine({}, f.resources);
  engine.push_audio(toy_block(0, 4.0, 1));
  engine.push_image(toy_canvas(0, 2));
  engine.advance(1.0);
  CHECK(engine.status().survivors == 10);

  const SessionConfig updated = engine.set_params({.fraction = 0.05});
  CHECK(updated.fraction == 0.05);
  const auto events = engine.advance(2.0);
  CHECK(statuses(events) == std::vector<std::string>{"stage1 refresh"});
  CHECK(engine.status().survivors == 50);

  CHECK_THROWS_AS(engine.set_params({.fraction = 1.5}), ValidationError);
  CHECK_THROWS_AS(engine.set_params({.fraction = 0.0}), ValidationError);
  CHECK_THROWS_AS(engine.set_params({.tick_interval = -1.0}), ValidationError);
  CHECK(engine.status().config.fraction == 0.05);
}

TEST_CASE("congruity mode smooths one minus the dissimilarity") {
  auto f = engine_fixture(4, 12.0, 1);
  LiveEngine engine({}, f.resources);
  engine.push_audio(toy_block(1, 4.0, 5));
  const ImageTensor canvas = toy_canvas(1, 6);
  engine.push_image(canvas);
  CHECK(count_kind(engine.advance(1.0), EventKind::kMatch) == 1);

  engine.set_params({.mode = SessionMode::kCongruity, .alpha = 0.5});
  const AudioClip a = toy_block(2, 4.0, 7);
  const AudioClip b = toy_block(3, 4.0, 8);
  engine.push_audio(a);
  const auto e1 = engine.advance(2.0);
  REQUIRE(e1.size() == 1);
  REQUIRE(e1[0].kind == EventKind::kCongruity);
  const double s1 = 1.0 - score_pair(*f.resources.model, canvas, mel_patch(a));
  CHECK(e1[0].congruity->raw == doctest::Approx(s1).epsilon(1e-12));
  CHECK(e1[0].congruity->smoothed == doctest::Approx(s1).epsilon(1e-12));

  engine.push_audio(b);
  const auto e2 = engine.advance(3.0);
  REQUIRE(e2.size() == 1);
  const double s2 = 1.0 - score_pair(*f.resources.model, canvas, mel_patch(b));
  CHECK(e2[0].congruity->raw == doctest::Approx(s2).epsilon(1e-12));
  CHECK(e2[0].congruity->smoothed == doctest::Approx(0.5 * s2 + 0.5 * s1).epsilon(1e-12));
}

TEST_CASE("reverse direction names the best painting for the matched chunk") {
  auto f = engine_fixture(4, 12.0, 1, 5);
  LiveEngine engine({}, f.resources);
  engine.push_audio(toy_block(1, 4.0, 5));
  engine.push_image(toy_canvas(1, 6));
  const auto events = engine.advance(1.0);
  const EngineEvent& m = events.back();
  REQUIRE(m.match);
  REQUIRE(m.match->painting_id);
  const auto pos = f.resources.index->find(m.match->chunk);
  REQUIRE(pos);
  const MelPatch music = f.mel(f.resources.index->record(*pos));
  double best = INFINITY;
  std::string best_id;
  for (std::size_t j = 0; j < f.resources.paintings.size(); ++j) {
    const double s = score_pair(*f.resources.model, f.resources.paintings[j], music);
    if (s < best) {
      best = s;
      best_id = f.resources.painting_ids[j];
    }
  }
  CHECK(*m.match->painting_id == best_id);
}

TEST_CASE("events are sequenced and fanned out to subscribers") {
  auto f = engine_fixture(4, 12.0, 1);
  SessionConfig cfg;
  cfg.event_queue = 3;
  LiveEngine engine(cfg, f.resources);
  auto sub = engine.subscribe();
  engine.push_audio(toy_block(1, 3.0, 5));
  engine.advance(5.0);
  const auto log = engine.log();
  REQUIRE(log.size() == 6);
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].sequence == i + 1);
  CHECK(sub->dropped() == 2);
  std::vector<std::uint64_t> seen;
  while (auto e = sub->pop(0)) seen.push_back(e->sequence);
  CHECK(seen == std::vector<std::uint64_t>{4, 5, 6});

  const auto j = nlohmann::json::parse(log[1].to_json());
  CHECK(j["kind"] == "status");
  CHECK(j["sequence"] == 2);
  CHECK(j["status"] == "warming up");
  sub->close();
  CHECK_FALSE(sub->pop(10).has_value());
}

TEST_CASE("input errors") {
  auto f = engine_fixture(4, 12.0, 1);
  LiveEngine engine({}, f.resources);
  AudioClip wrong;
  wrong.sample_rate = 44100;
  wrong.samples.assign(4410, 0.0f);
  CHECK_THROWS_AS(engine.push_audio(wrong), PreconditionError);
  const std::vector<std::byte> junk(64, std::byte{0x42});
  CHECK_THROWS_AS(engine.push_image(junk), DecodeError);
  CHECK_FALSE(engine.status().has_canvas);
}

TEST_CASE("session host and startup failures") {
  SessionHost host;
  CHECK_FALSE(host.running());
  CHECK_THROWS_AS(host.session(), StateError);

  SessionConfig cfg;
  cfg.model_path = "/nonexistent/model.bwnn";
  cfg.embedder_path = "/nonexistent/embedder.bwnn";
  cfg.index_path = "/nonexistent/library.cmei";
  try {
    host.start(cfg);
    FAIL("expected StartupError");
  } catch (const StartupError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/model.bwnn") != std::string::npos);
  }
  CHECK_FALSE(host.running());

  auto f = engine_fixture(4, 12.0, 1);
  auto engine = host.start({}, f.resources);
  CHECK(host.running());
  CHECK(host.session() == engine);
  host.stop();
  CHECK_THROWS_AS(host.session(), StateError);
}

TEST_CASE("session config parsing") {
  const auto cfg = parse_session_config(
      nlohmann::json{{"mode", "scenario2_congruity"}, {"fraction", 0.05}, {"model", "m.bwnn"},
                     {"embedder", "/abs/e.bwnn"}, {"index", "lib.cmei"}},
      "/data");
  CHECK(cfg.mode == SessionMode::kCongruity);
  CHECK(cfg.fraction == 0.05);
  CHECK(cfg.model_path == "/data/m.bwnn");
  CHECK(cfg.embedder_path == "/abs/e.bwnn");
  CHECK(parse_session_config(to_json(cfg)).index_path == cfg.index_path);
  CHECK_THROWS_AS(parse_session_config(nlohmann::json{{"fraction", 2.0}}), ValidationError);
  CHECK_THROWS_AS(parse_session_config(nlohmann::json{{"speed", 2.0}}), ValidationError);
  CHECK_THROWS_AS(parse_session_config(nlohmann::json{{"fraction", "x"}}), ValidationError);
  CHECK_THROWS_AS(parse_session_params(nlohmann::json{{"mode", "scenario3"}}), ValidationError);
  CHECK_THROWS_AS(parse_session_params(nlohmann::json::array()), ValidationError);
}

}  // namespace brushwork
