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
#include <filesystem>

#include <nlohmann/json.hpp>

#include "brushwork/errors.h"
#include "brushwork/manifest.h"
#include "brushwork/network.h"
#include "brushwork/replay.h"
#include "engine_fixture.h"

namespace brushwork {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::engine_fixture;
using testing::toy_block;

struct ReplayFiles {
  fs::path dir;
  AudioClip brush;
  RgbImage canvas_a;
  RgbImage canvas_b;
};

ReplayFiles write_replay_files(const std::string& name) {
  ReplayFiles f;
  f.dir = fs::temp_directory_path() / name;
  fs::remove_all(f.dir);
  fs::create_directories(f.dir);
  f.brush = toy_block(2, 8.0, 31);
  // Round-trip through PCM16 so the oracle sees what the replay decodes.
  write_file(f.dir / "brush.wav", encode_wav_pcm16(f.brush));
  f.brush = load_audio(f.dir / "brush.wav");
  Rng ra(32), rb(33);
  f.canvas_a = toy_artwork(0, 4, ra, 64);
  f.canvas_b = toy_artwork(3, 4, rb, 64);
  write_file(f.dir / "a.png", encode_png(f.canvas_a));
  write_file(f.dir / "b.png", encode_png(f.canvas_b));
  return f;
}

json demo_script() {
  return json{{"duration", 10.0},
              {"actions",
               json::array({{{"t", 0.0}, {"action", "push_audio"}, {"path", "brush.wav"}},
                            {{"t", 0.5}, {"action", "push_image"}, {"path", "a.png"}},
                            {{"t", 5.5}, {"action", "push_image"}, {"path", "b.png"}},
                            {{"t", 8.0},
                             {"action", "set_params"},
                             {"values", {{"fraction", 0.5}}}}})}};
}

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

TEST_CASE("two replays of one script produce identical logs") {
  const ReplayFiles files = write_replay_files("brushwork_replay_twice");
  write_text(files.dir / "script.json", demo_script().dump(2));
  const ReplayScript script = load_replay_script(files.dir / "script.json");
  REQUIRE(script.actions.size() == 4);
  CHECK(script.actions[0].path == files.dir / "brush.wav");

  auto fixture = engine_fixture(6, 20.0, 4);
  SessionConfig cfg;
  cfg.fraction = 0.2;
  LiveEngine first(cfg, fixture.resources);
  LiveEngine second(cfg, fixture.resources);
  const std::string a = events_ndjson(run_replay(first, script));
  const std::string b = events_ndjson(run_replay(second, script));
  CHECK(a == b);
  CHECK(std::count(a.begin(), a.end(), '\n') == static_cast<long>(first.log().size()));
}

TEST_CASE("replayed matches equal an offline two-step search on the same inputs") {
  const ReplayFiles files = write_replay_files("brushwork_replay_oracle");
  const ReplayScript script = parse_replay_script(demo_script(), files.dir);
  auto fixture = engine_fixture(6, 20.0, 4);
  SessionConfig cfg;
  cfg.fraction = 0.2;
  LiveEngine engine(cfg, fixture.resources);
  const auto log = run_replay(engine, script);

  std::vector<double> match_times;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (i > 0) CHECK(log[i].sequence > log[i - 1].sequence);
    if (log[i].kind != EventKind::kMatch) continue;
    const double t = log[i].timestamp;
    match_times.push_back(t);
    // Audio block k is pushed at k seconds, so a tick at t sees samples
    // up to min(t + 1, 8) seconds.
    const std::size_t end = static_cast<std::size_t>(std::min(t + 1.0, 8.0)) * kSampleRate;
    const AudioClip window = slice(files.brush, end - kClipSamples, kClipSamples);
    const RgbImage& canvas = t < 5.5 ? files.canvas_a : files.canvas_b;
    const double fraction = t < 8.0 ? 0.2 : 0.5;
    const StageOneResult s1 = stage1_filter(*fixture.resources.model, to_image_tensor(canvas),
                                            *fixture.resources.index, fixture.resources.mels,
                                            fraction);
    const Embedding q = embed_audio(*fixture.resources.embedder, mel_patch(window));
    INFO("tick " << t);
    const auto positions = s1.positions();
    CHECK(log[i].match->chunk == brute_force_match(*fixture.resources.index, positions, q.vector));
  }
  CHECK(match_times == std::vector<double>{3, 4, 5, 6, 7, 8, 9, 10});

  std::vector<double> refreshes;
  for (const EngineEvent& e : log) {
    if (e.status == "stage1 refresh") refreshes.push_back(e.timestamp);
  }
  CHECK(refreshes == std::vector<double>{3, 6, 8});
}

TEST_CASE("replay without a duration ends with the last input") {
  const ReplayFiles files = write_replay_files("brushwork_replay_list");
  const json list = json::array(
      {{{"t", 0.0}, {"action", "push_image"}, {"path", "a.png"}},
       {{"t", 1.0}, {"action", "push_audio"}, {"path", "brush.wav"}, {"block_seconds", 0.0}}});
  auto fixture = engine_fixture(4, 12.0, 1);
  LiveEngine engine({}, fixture.resources);
  const auto log = run_replay(engine, parse_replay_script(list, files.dir));
  CHECK(log.back().kind == EventKind::kMatch);
  CHECK(log.back().timestamp == 9.0);
  // The whole file lands before the tick at t = 1.
  CHECK(log[1].status == "stage1 refresh");
  CHECK(log[1].timestamp == 1.0);
  CHECK(log[2].kind == EventKind::kMatch);
  CHECK(log.size() == 11);
}

TEST_CASE("inputs after the duration are ignored") {
  const ReplayFiles files = write_replay_files("brushwork_replay_cut");
  json script = demo_script();
  script["duration"] = 5.0;
  auto fixture = engine_fixture(4, 12.0, 1);
  LiveEngine engine({}, fixture.resources);
  const auto log = run_replay(engine, parse_replay_script(script, files.dir));
  CHECK(log.back().timestamp == 5.0);
  CHECK(engine.status().clock == 5.0);
}

TEST_CASE("replay script validation") {
  CHECK_THROWS_AS(parse_replay_script(json{{"t", 0}}), ValidationError);
  CHECK_THROWS_AS(parse_replay_script(json::array({{{"t", 0}, {"action", "dance"}}})),
                  ValidationError);
  CHECK_THROWS_AS(parse_replay_script(json::array({{{"t", -1.0}, {"action", "push_image"},
                                                    {"path", "x.png"}}})),
                  ValidationError);
  CHECK_THROWS_AS(parse_replay_script(json::array({{{"t", 0}, {"action", "push_image"}}})),
                  ValidationError);
  CHECK_THROWS_AS(parse_replay_script(json::array(
                      {{{"t", 0}, {"action", "set_params"}, {"values", {{"fraction", "a"}}}}})),
                  ValidationError);
  const ReplayScript s = parse_replay_script(
      json::array({{{"t", 2}, {"action", "set_params"}, {"values", {{"mode", "scenario2_congruity"}}}}}));
  REQUIRE(s.actions.size() == 1);
  CHECK(s.actions[0].params.mode == SessionMode::kCongruity);
  CHECK_FALSE(s.duration.has_value());
}

}  // namespace brushwork
