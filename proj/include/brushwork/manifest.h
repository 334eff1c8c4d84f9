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

#ifndef BRUSHWORK_MANIFEST_H_
#define BRUSHWORK_MANIFEST_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace brushwork {

struct TrackEntry {
  std::string track_id;
  std::filesystem::path audio_path;
  std::filesystem::path artwork_path;
  std::string album_id;
  std::optional<int> class_id;
};

struct PaintingEntry {
  std::string painting_id;
  std::filesystem::path image_path;
};

// Paths are absolute after loading; relative paths in the JSON resolve
// against the manifest's directory.
struct LibraryManifest {
  std::vector<TrackEntry> tracks;
  std::vector<PaintingEntry> paintings;
};

// Throws ValidationError for missing fields or duplicate ids.
LibraryManifest parse_manifest(const std::string& json,
                               const std::filesystem::path& base_dir);
// Also throws IoError when a referenced file does not exist.
LibraryManifest load_manifest(const std::filesystem::path& path);
// Paths are written relative to `base_dir` when possible.
std::string manifest_to_json(const LibraryManifest& manifest,
                             const std::filesystem::path& base_dir);
void save_manifest(const LibraryManifest& manifest,
                   const std::filesystem::path& path);

// Builds a manifest from a folder laid out as
//   audio/[album/]track.wav
//   artwork/[album/]track.{png,bmp}  or  artwork/album.{png,bmp}
//   paintings/*.{png,bmp}
// A track's album is its subfolder under audio/, or the track itself at the
// top level. Entries are sorted by id. Throws IoError when audio/ is missing
// or a track has no artwork.
LibraryManifest scan_library(const std::filesystem::path& dir);

struct LabeledClipEntry {
  std::filesystem::path path;
  double offset_seconds = 0.0;
  int class_id = 0;
};

struct LabeledClipManifest {
  std::vector<std::string> classes;
  std::vector<LabeledClipEntry> clips;
};

LabeledClipManifest parse_clip_manifest(const std::string& json,
                                        const std::filesystem::path& base_dir);
LabeledClipManifest load_clip_manifest(const std::filesystem::path& path);
void save_clip_manifest(const LabeledClipManifest& manifest,
                        const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace brushwork

#endif  // BRUSHWORK_MANIFEST_H_
