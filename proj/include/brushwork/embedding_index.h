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

#ifndef BRUSHWORK_EMBEDDING_INDEX_H_
#define BRUSHWORK_EMBEDDING_INDEX_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brushwork/audio_frontend.h"
#include "brushwork/embedder.h"

namespace brushwork {

struct ChunkKey {
  std::string track_id;
  std::uint32_t chunk_index = 0;
  friend auto operator<=>(const ChunkKey&, const ChunkKey&) = default;
  friend bool operator==(const ChunkKey&, const ChunkKey&) = default;
};

struct ChunkRecord {
  ChunkKey key;
  std::vector<float> embedding;
  double start_time() const { return kClipSeconds * key.chunk_index; }
  friend bool operator==(const ChunkRecord&, const ChunkRecord&) = default;
};

// Immutable set of chunk embeddings kept in (track_id, chunk_index) order.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  // Sorts the records. Throws ValidationError on duplicate keys and
  // ShapeError when a record's length differs from `dimension`.
  EmbeddingIndex(std::uint32_t dimension, std::vector<ChunkRecord> records);

  std::uint32_t dimension() const { return dimension_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const ChunkRecord& record(std::size_t i) const { return records_.at(i); }
  std::span<const ChunkRecord> records() const { return records_; }
  std::optional<std::size_t> find(const ChunkKey& key) const;
  // Contiguous [size, dimension] copy of the embeddings.
  std::span<const float> matrix() const { return matrix_; }

  friend bool operator==(const EmbeddingIndex& a, const EmbeddingIndex& b) {
    return a.dimension_ == b.dimension_ && a.records_ == b.records_;
  }

 private:
  std::uint32_t dimension_ = 0;
  std::vector<ChunkRecord> records_;
  std::vector<float> matrix_;
};

struct Neighbor {
  std::size_t position = 0;  // into EmbeddingIndex::records()
  double distance = 0.0;
};

// Exact k nearest under Euclidean distance with ties broken by key order.
// Throws EmptyIndexError for an empty index or candidate set, ShapeError
// on a dimension mismatch, PreconditionError for k == 0.
std::vector<Neighbor> nearest(const EmbeddingIndex& index,
                              std::span<const float> query, std::size_t k);
// Restricted to `candidates` (record positions). Duplicates are ignored.
std::vector<Neighbor> nearest(const EmbeddingIndex& index,
                              std::span<const float> query, std::size_t k,
                              std::span<const std::size_t> candidates);
// Restricted to the given keys; keys absent from the index are ignored.
std::vector<Neighbor> nearest(const EmbeddingIndex& index,
                              std::span<const float> query, std::size_t k,
                              std::span<const ChunkKey> filter);

struct IndexSource {
  std::string track_id;
  AudioClip audio;                      // 16 kHz
  std::filesystem::path source_path;    // recorded in the companion manifest
};

struct IndexedTrack {
  std::string track_id;
  std::filesystem::path source_path;
  double duration = 0.0;
  std::uint32_t chunks = 0;
};

struct BuildReport {
  std::vector<IndexedTrack> tracks;
  std::vector<std::string> warnings;
};

struct BuiltIndex {
  EmbeddingIndex index;
  BuildReport report;
};

// Splits each track into consecutive 4 s chunks (a shorter tail is
// dropped) and embeds every chunk. Tracks under 4 s are skipped with a
// warning in the report.
BuiltIndex build_index(std::span<const IndexSource> tracks,
                       const AudioEmbedder& embedder);

inline constexpr std::uint16_t kIndexVersion = 1;

std::vector<std::byte> serialize_index(const EmbeddingIndex& index);
// Throws FormatError (magic), VersionError, CorruptionError.
EmbeddingIndex parse_index(std::span<const std::byte> bytes);
void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

// Companion JSON next to the index file: "<index>.tracks.json".
std::filesystem::path index_manifest_path(const std::filesystem::path& index_path);
void save_index_manifest(const std::vector<IndexedTrack>& tracks,
                         const std::filesystem::path& index_path);
std::vector<IndexedTrack> load_index_manifest(const std::filesystem::path& index_path);

}  // namespace brushwork

#endif  // BRUSHWORK_EMBEDDING_INDEX_H_
