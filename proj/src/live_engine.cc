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

#include "brushwork/live_engine.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <spdlog/spdlog.h>

#include "brushwork/errors.h"
#include "brushwork/hash.h"
#include "brushwork/manifest.h"

namespace brushwork {
namespace {

using nlohmann::json;

constexpr double kTimeSlack = 1e-9;

template <typename T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename Load>
auto load_or_fail(const char* what, const std::filesystem::path& path, Load load) {
  try {
    return load(path);
  } catch (const std::exception& e) {
    throw StartupError(std::string("cannot load ") + what + " '" + path.string() +
                       "': " + e.what());
  }
}

json congruity_json(const CongruityState& c) {
  return {{"raw", c.raw}, {"smoothed", c.smoothed}, {"alpha", c.alpha}};
}

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::kMatch: return "match";
    case EventKind::kCongruity: return "congruity";
    case EventKind::kStatus: return "status";
  }
  return "status";
}

}  // namespace

std::string mode_name(SessionMode mode) {
  return mode == SessionMode::kCrossfeed ? "scenario1_crossfeed" : "scenario2_congruity";
}

SessionMode parse_mode(const std::string& name) {
  if (name == "scenario1_crossfeed") return SessionMode::kCrossfeed;
  if (name == "scenario2_congruity") return SessionMode::kCongruity;
  throw ValidationError("unknown mode '" + name + "'");
}

void SessionConfig::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("fraction must be in (0, 1]");
  }
  if (!(tick_interval > 0.0) || !std::isfinite(tick_interval)) {
    throw ValidationError("tick_interval must be positive");
  }
  if (!(image_refresh >= 0.0) || !std::isfinite(image_refresh)) {
    throw ValidationError("image_refresh must be non-negative");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in (0, 1]");
  if (event_queue == 0) throw ValidationError("event_queue must be positive");
}

SessionParams parse_session_params(const json& j) {
  if (!j.is_object()) throw ValidationError("parameters must be a JSON object");
  SessionParams p;
  for (const auto& [key, value] : j.items()) {
    if (key == "mode") {
      p.mode = parse_mode(get_field<std::string>(j, "mode"));
    } else if (key == "fraction") {
      p.fraction = get_field<double>(j, "fraction");
    } else if (key == "tick_interval") {
      p.tick_interval = get_field<double>(j, "tick_interval");
    } else if (key == "image_refresh") {
      p.image_refresh = get_field<double>(j, "image_refresh");
    } else if (key == "alpha") {
      p.alpha = get_field<double>(j, "alpha");
    } else {
      throw ValidationError("unknown parameter '" + key + "'");
    }
  }
  return p;
}

SessionConfig parse_session_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("session config must be a JSON object");
  SessionConfig c;
  json params = json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      c.model_path = resolve(base_dir, get_field<std::string>(j, "model"));
    } else if (key == "embedder") {
      c.embedder_path = resolve(base_dir, get_field<std::string>(j, "embedder"));
    } else if (key == "index") {
      c.index_path = resolve(base_dir, get_field<std::string>(j, "index"));
    } else if (key == "manifest") {
      c.manifest_path = resolve(base_dir, get_field<std::string>(j, "manifest"));
    } else if (key == "event_queue") {
      c.event_queue = get_field<std::size_t>(j, "event_queue");
    } else {
      params[key] = value;
    }
  }
  const SessionParams p = parse_session_params(params);
  if (p.mode) c.mode = *p.mode;
  if (p.fraction) c.fraction = *p.fraction;
  if (p.tick_interval) c.tick_interval = *p.tick_interval;
  if (p.image_refresh) c.image_refresh = *p.image_refresh;
  if (p.alpha) c.alpha = *p.alpha;
  c.validate();
  return c;
}

json to_json(const SessionConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"fraction", c.fraction},
          {"tick_interval", c.tick_interval},
          {"image_refresh", c.image_refresh},
          {"alpha", c.alpha},
          {"event_queue", c.event_queue},
          {"model", c.model_path.string()},
          {"embedder", c.embedder_path.string()},
          {"index", c.index_path.string()},
          {"manifest", c.manifest_path.string()}};
}

RollingBuffer::RollingBuffer(std::size_t capacity) : data_(capacity, 0.0f) {
  if (capacity == 0) throw PreconditionError("buffer capacity must be positive");
}

void RollingBuffer::push(std::span<const float> samples) {
  total_ += samples.size();
  if (samples.size() >= data_.size()) {
    samples = samples.last(data_.size());
  }
  for (float v : samples) {
    data_[head_] = v;
    head_ = (head_ + 1) % data_.size();
  }
  size_ = std::min(data_.size(), size_ + samples.size());
}

std::vector<float> RollingBuffer::snapshot() const {
  std::vector<float> out(size_);
  const std::size_t start = (head_ + data_.size() - size_) % data_.size();
  for (std::size_t i = 0; i < size_; ++i) out[i] = data_[(start + i) % data_.size()];
  return out;
}

std::string EngineEvent::to_json() const {
  json j = {{"sequence", sequence}, {"kind", kind_name(kind)}, {"timestamp", timestamp}};
  if (match) j["match"] = json::parse(brushwork::to_json(*match));
  if (congruity) j["congruity"] = congruity_json(*congruity);
  if (kind == EventKind::kStatus) j["status"] = status;
  return j.dump();
}

void Subscription::push(const EngineEvent& event) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    if (queue_.size() == capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(event);
  }
  cv_.notify_one();
}

std::optional<EngineEvent> Subscription::pop(int timeout_ms) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
               [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  EngineEvent e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::uint64_t Subscription::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

LibraryAudio::LibraryAudio(const std::vector<IndexedTrack>& tracks) {
  for (const IndexedTrack& t : tracks) sources_[t.track_id] = t.source_path;
}

MelPatch LibraryAudio::mel(const ChunkRecord& record) {
  if (record.key.track_id != cached_id_) {
    auto it = sources_.find(record.key.track_id);
    if (it == sources_.end()) {
      throw ValidationError("no audio source for track '" + record.key.track_id + "'");
    }
    cached_ = load_audio(it->second, kSampleRate);
    cached_id_ = record.key.track_id;
  }
  return mel_patch(slice(cached_, record.key.chunk_index * kClipSamples, kClipSamples));
}

EngineResources load_resources(const SessionConfig& config) {
  config.validate();
  EngineResources r;
  r.model = load_or_fail("correspondence model", config.model_path, [](const auto& p) {
    return std::make_shared<const CorrespondenceModel>(CorrespondenceModel::load(p));
  });
  r.embedder = load_or_fail("embedder", config.embedder_path, [](const auto& p) {
    return std::make_shared<const AudioEmbedder>(AudioEmbedder::load(p));
  });
  r.index = load_or_fail("index", config.index_path, [](const auto& p) {
    return std::make_shared<const EmbeddingIndex>(load_index(p));
  });
  const auto tracks = load_or_fail("index manifest", index_manifest_path(config.index_path),
                                   [&](const auto&) { return load_index_manifest(config.index_path); });
  auto audio = std::make_shared<LibraryAudio>(tracks);
  r.mels = [audio](const ChunkRecord& rec) { return audio->mel(rec); };
  if (!config.manifest_path.empty()) {
    const LibraryManifest m = load_or_fail("manifest", config.manifest_path,
                                           [](const auto& p) { return load_manifest(p); });
    for (const PaintingEntry& p : m.paintings) {
      r.painting_ids.push_back(p.painting_id);
      r.paintings.push_back(load_or_fail("painting", p.image_path,
                                         [](const auto& path) { return load_image(path); }));
    }
  }
  return r;
}

json EngineStatus::to_json() const {
  return {{"config", brushwork::to_json(config)},
          {"buffer_samples", buffer_samples},
          {"warm", warm},
          {"has_canvas", has_canvas},
          {"canvas_hash", hex64(canvas_hash)},
          {"survivors", survivors},
          {"index_size", index_size},
          {"last_sequence", last_sequence},
          {"clock", clock}};
}

LiveEngine::LiveEngine(SessionConfig config, EngineResources resources)
    : config_(std::move(config)), res_(std::move(resources)) {
  config_.validate();
  if (!res_.model || !res_.embedder || !res_.index || !res_.mels) {
    throw StartupError("session resources are incomplete");
  }
  if (res_.index->empty()) throw StartupError("index '" + config_.index_path.string() + "' is empty");
  if (res_.index->dimension() != res_.embedder->dimension()) {
    throw StartupError("index dimension does not match the embedder");
  }
  const auto started = std::chrono::steady_clock::now();
  scorer_ = std::make_unique<Stage1Scorer>(*res_.model, *res_.index, res_.mels);
  if (!res_.paintings.empty()) {
    painting_library_.emplace(*res_.model, res_.painting_ids, res_.paintings);
  }
  spdlog::debug("session ready: {} chunks scored in {:.2f}s", res_.index->size(),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  congruity_.alpha = config_.alpha;
  next_tick_ = config_.tick_interval;
  std::lock_guard lock(mu_);
  emit(EventKind::kStatus, 0.0).status = "session started";
}

EngineEvent& LiveEngine::emit(EventKind kind, double now) {
  EngineEvent e;
  e.sequence = ++sequence_;
  e.kind = kind;
  e.timestamp = now;
  log_.push_back(std::move(e));
  return log_.back();
}

void LiveEngine::push_audio(const AudioClip& block) {
  if (block.sample_rate != kSampleRate) {
    throw PreconditionError("audio blocks must be 16 kHz mono, got " +
                            std::to_string(block.sample_rate) + " Hz");
  }
  std::lock_guard lock(mu_);
  buffer_.push(block.samples);
}

ImageAck LiveEngine::push_image(std::span<const std::byte> raw) {
  return push_image(ingest_image(raw));
}

ImageAck LiveEngine::push_image(const ImageTensor& image) {
  std::lock_guard lock(mu_);
  return set_canvas(image);
}

ImageAck LiveEngine::set_canvas(ImageTensor image) {
  const std::uint64_t h = content_hash(image);
  const bool changed = !canvas_ || h != canvas_hash_;
  canvas_ = std::move(image);
  canvas_hash_ = h;
  if (changed) refilter_pending_ = true;
  return {h, changed};
}

std::vector<EngineEvent> LiveEngine::advance(double now, bool inclusive) {
  std::lock_guard lock(mu_);
  std::vector<EngineEvent> out;
  const double limit = inclusive ? now + kTimeSlack : now - kTimeSlack;
  while (next_tick_ <= limit) {
    const double t = next_tick_;
    next_tick_ += config_.tick_interval;
    auto events = tick_locked(t);
    out.insert(out.end(), events.begin(), events.end());
  }
  clock_ = std::max(clock_, now);
  return out;
}

std::vector<EngineEvent> LiveEngine::tick(double now) {
  std::lock_guard lock(mu_);
  return tick_locked(now);
}

std::vector<EngineEvent> LiveEngine::tick_locked(double now) {
  const std::size_t first = log_.size();
  clock_ = std::max(clock_, now);
  if (!buffer_.full()) {
    emit(EventKind::kStatus, now).status = "warming up";
  } else if (!canvas_) {
    emit(EventKind::kStatus, now).status = "waiting for canvas";
  } else {
    const MelPatch live = mel_patch(AudioClip{buffer_.snapshot(), kSampleRate});
    if (config_.mode == SessionMode::kCrossfeed) {
      const bool rate_ok = !last_refilter_ ||
                           now - *last_refilter_ + kTimeSlack >= config_.image_refresh;
      if (!survivors_ || (refilter_pending_ && (refilter_forced_ || rate_ok))) {
        survivors_ = scorer_->filter(*canvas_, config_.fraction, hex64(canvas_hash_));
        last_refilter_ = now;
        refilter_pending_ = false;
        refilter_forced_ = false;
        emit(EventKind::kStatus, now).status = "stage1 refresh";
      }
      MatchEvent m = stage2_retrieve(*res_.embedder, *res_.index, *survivors_, live, now);
      if (painting_library_) {
        const auto pos = res_.index->find(m.chunk);
        m.painting_id = painting_library_->best(*res_.model, res_.mels(res_.index->record(*pos))).first;
      }
      emit(EventKind::kMatch, now).match = std::move(m);
    } else {
      congruity_ = congruity_update(congruity_, *res_.model, *canvas_, live);
      emit(EventKind::kCongruity, now).congruity = congruity_;
    }
  }
  std::vector<EngineEvent> out(log_.begin() + static_cast<std::ptrdiff_t>(first), log_.end());
  for (auto it = subscribers_.begin(); it != subscribers_.end();) {
    if (auto sub = it->lock()) {
      for (const EngineEvent& e : out) sub->push(e);
      ++it;
    } else {
      it = subscribers_.erase(it);
    }
  }
  return out;
}

SessionConfig LiveEngine::set_params(const SessionParams& params) {
  std::lock_guard lock(mu_);
  SessionConfig next = config_;
  if (params.mode) next.mode = *params.mode;
  if (params.fraction) next.fraction = *params.fraction;
  if (params.tick_interval) next.tick_interval = *params.tick_interval;
  if (params.image_refresh) next.image_refresh = *params.image_refresh;
  if (params.alpha) next.alpha = *params.alpha;
  next.validate();
  if (next.fraction != config_.fraction) {
    refilter_pending_ = true;
    refilter_forced_ = true;
  }
  congruity_.alpha = next.alpha;
  config_ = next;
  return config_;
}

EngineStatus LiveEngine::status() const {
  std::lock_guard lock(mu_);
  EngineStatus s;
  s.config = config_;
  s.buffer_samples = buffer_.size();
  s.warm = buffer_.full();
  s.has_canvas = canvas_.has_value();
  s.canvas_hash = canvas_hash_;
  s.survivors = survivors_ ? survivors_->survivors.size() : 0;
  s.index_size = res_.index->size();
  s.last_sequence = sequence_;
  s.clock = clock_;
  return s;
}

std::shared_ptr<Subscription> LiveEngine::subscribe() {
  std::lock_guard lock(mu_);
  auto sub = std::make_shared<Subscription>(config_.event_queue);
  subscribers_.push_back(sub);
  return sub;
}

std::vector<EngineEvent> LiveEngine::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::shared_ptr<LiveEngine> SessionHost::start(const SessionConfig& config) {
  return start(config, load_resources(config));
}

std::shared_ptr<LiveEngine> SessionHost::start(const SessionConfig& config,
                                               EngineResources resources) {
  auto engine = std::make_shared<LiveEngine>(config, std::move(resources));
  std::lock_guard lock(mu_);
  engine_ = engine;
  return engine;
}

std::shared_ptr<LiveEngine> SessionHost::session() const {
  std::lock_guard lock(mu_);
  if (!engine_) throw StateError("no session is running");
  return engine_;
}

bool SessionHost::running() const {
  std::lock_guard lock(mu_);
  return engine_ != nullptr;
}

void SessionHost::stop() {
  std::lock_guard lock(mu_);
  engine_.reset();
}

}  // namespace brushwork
