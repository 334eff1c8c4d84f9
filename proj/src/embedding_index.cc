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

#include "brushwork/embedding_index.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "brushwork/byte_io.h"
#include "brushwork/errors.h"
#include "brushwork/manifest.h"
#include "brushwork/model_common.h"
#include "brushwork/network.h"

namespace brushwork {
namespace {

constexpr char kMagic[4] = {'C', 'M', 'E', 'I'};
constexpr std::size_t kEmbedBatch = 16;

double squared_distance(const float* a, const float* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

std::vector<Neighbor> select(const EmbeddingIndex& index, std::span<const float> query,
                             std::size_t k, std::vector<std::size_t> positions) {
  if (k == 0) throw PreconditionError("k must be at least 1");
  if (query.size() != index.dimension()) {
    throw ShapeError("query has dimension " + std::to_string(query.size()) +
                     ", index has " + std::to_string(index.dimension()));
  }
  if (positions.empty()) throw EmptyIndexError("no records to search");
  const std::size_t d = index.dimension();
  const float* m = index.matrix().data();
  std::vector<Neighbor> all;
  all.reserve(positions.size());
  for (std::size_t p : positions) {
    all.push_back({p, squared_distance(query.data(), m + p * d, d)});
  }
  // Records are stored in key order, so position breaks ties.
  auto less = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.position < b.position;
  };
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + take, all.end(), less);
  all.resize(take);
  for (Neighbor& n : all) n.distance = std::sqrt(n.distance);
  return all;
}

}  // namespace

EmbeddingIndex::EmbeddingIndex(std::uint32_t dimension, std::vector<ChunkRecord> records)
    : dimension_(dimension), records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(),
            [](const ChunkRecord& a, const ChunkRecord& b) { return a.key < b.key; });
  matrix_.reserve(records_.size() * dimension_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].embedding.size() != dimension_) {
      throw ShapeError("record embedding length " +
                       std::to_string(records_[i].embedding.size()) +
                       " differs from index dimension " + std::to_string(dimension_));
    }
    if (i > 0 && records_[i].key == records_[i - 1].key) {
      throw ValidationError("duplicate chunk " + records_[i].key.track_id + "#" +
                            std::to_string(records_[i].key.chunk_index));
    }
    matrix_.insert(matrix_.end(), records_[i].embedding.begin(), records_[i].embedding.end());
  }
}

std::optional<std::size_t> EmbeddingIndex::find(const ChunkKey& key) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), key,
                             [](const ChunkRecord& r, const ChunkKey& k) { return r.key < k; });
  if (it == records_.end() || it->key != key) return std::nullopt;
  return static_cast<std::size_t>(it - records_.begin());
}

std::vector<Neighbor> nearest(const EmbeddingIndex& index, std::span<const float> query,
                              std::size_t k) {
  std::vector<std::size_t> all(index.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return select(index, query, k, std::move(all));
}

std::vector<Neighbor> nearest(const EmbeddingIndex& index, std::span<const float> query,
                              std::size_t k, std::span<const std::size_t> candidates) {
  std::vector<std::size_t> positions(candidates.begin(), candidates.end());
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  if (!positions.empty() && positions.back() >= index.size()) {
    throw PreconditionError("candidate position out of range");
  }
  return select(index, query, k, std::move(positions));
}

std::vector<Neighbor> nearest(const EmbeddingIndex& index, std::span<const float> query,
                              std::size_t k, std::span<const ChunkKey> filter) {
  std::vector<std::size_t> positions;
  for (const ChunkKey& key : filter) {
    if (auto p = index.find(key)) positions.push_back(*p);
  }
  return nearest(index, query, k, positions);
}

BuiltIndex build_index(std::span<const IndexSource> tracks, const AudioEmbedder& embedder) {
  BuiltIndex out;
  std::vector<ChunkRecord> records;
  std::vector<MelPatch> pending;
  std::vector<ChunkKey> pending_keys;
  auto flush = [&] {
    if (pending.empty()) return;
    std::vector<const MelPatch*> ptrs;
    for (const MelPatch& m : pending) ptrs.push_back(&m);
    const Tensor e = embedder.embed_batch(mel_batch(ptrs));
    const std::size_t d = embedder.dimension();
    for (std::size_t i = 0; i < pending.size(); ++i) {
      records.push_back({pending_keys[i], std::vector<float>(e.data() + i * d, e.data() + (i + 1) * d)});
    }
    pending.clear();
    pending_keys.clear();
  };
  for (const IndexSource& src : tracks) {
    if (src.audio.sample_rate != kSampleRate) {
      throw PreconditionError("track '" + src.track_id + "' is not at 16 kHz");
    }
    const std::size_t chunks = src.audio.samples.size() / kClipSamples;
    if (chunks == 0) {
      const std::string msg = "skipped track '" + src.track_id + "': shorter than 4 s";
      spdlog::warn("{}", msg);
      out.report.warnings.push_back(msg);
      continue;
    }
    for (std::size_t c = 0; c < chunks; ++c) {
      pending.push_back(mel_patch(slice(src.audio, c * kClipSamples, kClipSamples)));
      pending_keys.push_back({src.track_id, static_cast<std::uint32_t>(c)});
      if (pending.size() == kEmbedBatch) flush();
    }
    out.report.tracks.push_back({src.track_id, src.source_path, src.audio.duration(),
                                 static_cast<std::uint32_t>(chunks)});
  }
  flush();
  out.index = EmbeddingIndex(embedder.dimension(), std::move(records));
  return out;
}

std::vector<std::byte> serialize_index(const EmbeddingIndex& index) {
  ByteWriter w;
  w.raw(std::as_bytes(std::span(kMagic)));
  w.u16(kIndexVersion);
  w.u32(index.dimension());
  w.u64(index.size());
  for (const ChunkRecord& r : index.records()) {
    if (r.key.track_id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ValidationError("track id too long for the index format");
    }
    w.u16(static_cast<std::uint16_t>(r.key.track_id.size()));
    w.str(r.key.track_id);
    w.u32(r.key.chunk_index);
    w.f32_array(r.embedding);
  }
  return w.take();
}

EmbeddingIndex parse_index(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < sizeof(kMagic)) throw CorruptionError("index file truncated");
  if (r.str(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw FormatError("not an embedding index (bad magic)");
  }
  const std::uint16_t version = r.u16();
  if (version != kIndexVersion) {
    throw VersionError("unsupported index version " + std::to_string(version));
  }
  const std::uint32_t dimension = r.u32();
  const std::uint64_t count = r.u64();
  const std::uint64_t min_record = 2 + 4 + 4ull * dimension;
  if (count > r.remaining() / min_record) {
    throw CorruptionError("index declares " + std::to_string(count) +
                          " records but the file is too short");
  }
  std::vector<ChunkRecord> records(count);
  for (ChunkRecord& rec : records) {
    const std::uint16_t len = r.u16();
    rec.key.track_id = r.str(len);
    rec.key.chunk_index = r.u32();
    rec.embedding.resize(dimension);
    r.f32_array(rec.embedding);
  }
  if (!r.at_end()) throw CorruptionError("trailing bytes after index records");
  try {
    return EmbeddingIndex(dimension, std::move(records));
  } catch (const ValidationError& e) {
    throw CorruptionError(std::string("invalid index contents: ") + e.what());
  }
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  write_file(path, serialize_index(index));
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
  return parse_index(read_file(path));
}

std::filesystem::path index_manifest_path(const std::filesystem::path& index_path) {
  std::filesystem::path p = index_path;
  p += ".tracks.json";
  return p;
}

void save_index_manifest(const std::vector<IndexedTrack>& tracks,
                         const std::filesystem::path& index_path) {
  const std::filesystem::path path = index_manifest_path(index_path);
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  nlohmann::json list = nlohmann::json::array();
  for (const IndexedTrack& t : tracks) {
    std::filesystem::path src = std::filesystem::absolute(t.source_path);
    std::filesystem::path rel = src.lexically_relative(base);
    list.push_back({{"track_id", t.track_id},
                    {"source", (rel.empty() ? src : rel).generic_string()},
                    {"duration", t.duration},
                    {"chunks", t.chunks}});
  }
  write_text(path, nlohmann::json{{"tracks", list}}.dump(2) + "\n");
}

std::vector<IndexedTrack> load_index_manifest(const std::filesystem::path& index_path) {
  const std::filesystem::path path = index_manifest_path(index_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad index manifest " + path.string() + ": " + e.what());
  }
  std::vector<IndexedTrack> out;
  for (const auto& t : doc.at("tracks")) {
    IndexedTrack it;
    it.track_id = t.at("track_id").get<std::string>();
    std::filesystem::path src(t.at("source").get<std::string>());
    it.source_path = src.is_absolute() ? src : (path.parent_path() / src).lexically_normal();
    it.duration = t.value("duration", 0.0);
    it.chunks = t.value("chunks", 0u);
    out.push_back(std::move(it));
  }
  return out;
}

}  // namespace brushwork
