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

#ifndef BRUSHWORK_LIVE_ENGINE_H_
#define BRUSHWORK_LIVE_ENGINE_H_

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brushwork/correspondence.h"
#include "brushwork/embedder.h"
#include "brushwork/embedding_index.h"
#include "brushwork/selection.h"

namespace brushwork {

enum class SessionMode { kCrossfeed, kCongruity };

std::string mode_name(SessionMode mode);
// Accepts "scenario1_crossfeed" / "scenario2_congruity". Throws
// ValidationError otherwise.
SessionMode parse_mode(const std::string& name);

struct SessionConfig {
  SessionMode mode = SessionMode::kCrossfeed;
  double fraction = 0.01;
  double tick_interval = 1.0;  // seconds
  double image_refresh = 2.0;  // minimum seconds between canvas-driven re-filters
  double alpha = kDefaultCongruityAlpha;
  std::size_t event_queue = 256;  // per subscriber
  std::filesystem::path model_path;
  std::filesystem::path embedder_path;
  std::filesystem::path index_path;
  std::filesystem::path manifest_path;  // optional painting library

  // Throws ValidationError.
  void validate() const;
};

// Optional fields of a parameter update.
struct SessionParams {
  std::optional<SessionMode> mode;
  std::optional<double> fraction;
  std::optional<double> tick_interval;
  std::optional<double> image_refresh;
  std::optional<double> alpha;
};

// Throws ValidationError for unknown keys or wrong types.
SessionConfig parse_session_config(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {});
SessionParams parse_session_params(const nlohmann::json& j);
nlohmann::json to_json(const SessionConfig& config);

// Most recent `capacity` samples in arrival order.
class RollingBuffer {
 public:
  explicit RollingBuffer(std::size_t capacity = kClipSamples);

  void push(std::span<const float> samples);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return data_.size(); }
  std::uint64_t total_pushed() const { return total_; }
  bool full() const { return size_ == data_.size(); }
  std::vector<float> snapshot() const;

 private:
  std::vector<float> data_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
  std::uint64_t total_ = 0;
};

enum class EventKind { kMatch, kCongruity, kStatus };

struct EngineEvent {
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::kStatus;
  double timestamp = 0.0;
  std::optional<MatchEvent> match;
  std::optional<CongruityState> congruity;
  std::string status;

  std::string to_json() const;
};

// Bounded per-subscriber queue; a full queue drops its oldest event.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  void push(const EngineEvent& event);
  // Waits up to `timeout_ms`; empty when nothing arrived or closed.
  std::optional<EngineEvent> pop(int timeout_ms);
  void close();
  bool closed() const;
  std::uint64_t dropped() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<EngineEvent> queue_;
  std::size_t capacity_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

// Chunk audio for a built index, read from the sources listed in the
// companion manifest. Keeps the most recently used track in memory.
class LibraryAudio {
 public:
  LibraryAudio() = default;
  explicit LibraryAudio(const std::vector<IndexedTrack>& tracks);
  MelPatch mel(const ChunkRecord& record);

 private:
  std::map<std::string, std::filesystem::path> sources_;
  std::string cached_id_;
  AudioClip cached_;
};

struct EngineResources {
  std::shared_ptr<const CorrespondenceModel> model;
  std::shared_ptr<const AudioEmbedder> embedder;
  std::shared_ptr<const EmbeddingIndex> index;
  ChunkMelSource mels;
  std::vector<std::string> painting_ids;
  std::vector<ImageTensor> paintings;
};

// Loads every file the config names. Throws StartupError naming the file.
EngineResources load_resources(const SessionConfig& config);

struct ImageAck {
  std::uint64_t hash = 0;
  bool changed = false;
};

struct EngineStatus {
  SessionConfig config;
  std::size_t buffer_samples = 0;
  bool warm = false;
  bool has_canvas = false;
  std::uint64_t canvas_hash = 0;
  std::size_t survivors = 0;
  std::size_t index_size = 0;
  std::uint64_t last_sequence = 0;
  double clock = 0.0;

  nlohmann::json to_json() const;
};

// One performance session. All methods are serialized internally; time is
// supplied by the caller so replays are deterministic.
class LiveEngine {
 public:
  LiveEngine(SessionConfig config, EngineResources resources);

  void push_audio(const AudioClip& block);
  ImageAck push_image(std::span<const std::byte> raw);
  ImageAck push_image(const ImageTensor& image);

  // Runs every tick due at or before `now` (strictly before it when
  // `inclusive` is false), `tick_interval` apart starting one interval
  // after session start.
  std::vector<EngineEvent> advance(double now, bool inclusive = true);
  // One tick at `now` regardless of the schedule.
  std::vector<EngineEvent> tick(double now);

  // Throws ValidationError and leaves the config unchanged on a bad value.
  SessionConfig set_params(const SessionParams& params);
  EngineStatus status() const;

  std::shared_ptr<Subscription> subscribe();
  std::vector<EngineEvent> log() const;

 private:
  EngineEvent& emit(EventKind kind, double now);
  std::vector<EngineEvent> tick_locked(double now);
  ImageAck set_canvas(ImageTensor image);

  mutable std::mutex mu_;
  SessionConfig config_;
  EngineResources res_;
  std::unique_ptr<Stage1Scorer> scorer_;
  std::optional<PaintingLibrary> painting_library_;
  RollingBuffer buffer_;
  std::optional<ImageTensor> canvas_;
  std::uint64_t canvas_hash_ = 0;
  std::optional<StageOneResult> survivors_;
  bool refilter_pending_ = false;
  bool refilter_forced_ = false;
  std::optional<double> last_refilter_;
  CongruityState congruity_;
  double next_tick_ = 0.0;
  double clock_ = 0.0;
  std::uint64_t sequence_ = 0;
  std::vector<EngineEvent> log_;
  std::vector<std::weak_ptr<Subscription>> subscribers_;
};

// Holds at most one session; calls without one raise StateError.
class SessionHost {
 public:
  // Replaces any running session.
  std::shared_ptr<LiveEngine> start(const SessionConfig& config);
  std::shared_ptr<LiveEngine> start(const SessionConfig& config,
                                    EngineResources resources);
  std::shared_ptr<LiveEngine> session() const;
  bool running() const;
  void stop();

 private:
  mutable std::mutex mu_;
  std::shared_ptr<LiveEngine> engine_;
};

}  // namespace brushwork

#endif  // BRUSHWORK_LIVE_ENGINE_H_
