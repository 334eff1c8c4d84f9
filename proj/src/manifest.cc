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

#include "brushwork/manifest.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brushwork/errors.h"

namespace brushwork {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string relative_to(const fs::path& path, const fs::path& base) {
  if (base.empty()) return path.generic_string();
  fs::path rel = path.lexically_relative(base);
  if (rel.empty()) return path.generic_string();
  return rel.generic_string();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
}

std::string required_string(const json& obj, const char* key, const char* what) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ValidationError(std::string(what) + " entry needs string field '" + key + "'");
  }
  return it->get<std::string>();
}

void require_exists(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("referenced file not found: " + path.string());
}

}  // namespace

LibraryManifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw ValidationError("manifest must be a JSON object");
  LibraryManifest out;
  std::set<std::string> seen;
  for (const json& t : doc.value("tracks", json::array())) {
    TrackEntry e;
    e.track_id = required_string(t, "track_id", "track");
    e.audio_path = resolve(base_dir, required_string(t, "audio_path", "track"));
    e.artwork_path = resolve(base_dir, required_string(t, "artwork_path", "track"));
    e.album_id = required_string(t, "album_id", "track");
    if (t.contains("class_id") && !t["class_id"].is_null()) {
      e.class_id = t["class_id"].get<int>();
    }
    if (e.track_id.empty()) throw ValidationError("empty track_id");
    if (!seen.insert(e.track_id).second) {
      throw ValidationError("duplicate track_id '" + e.track_id + "'");
    }
    out.tracks.push_back(std::move(e));
  }
  seen.clear();
  for (const json& p : doc.value("paintings", json::array())) {
    PaintingEntry e;
    e.painting_id = required_string(p, "painting_id", "painting");
    e.image_path = resolve(base_dir, required_string(p, "image_path", "painting"));
    if (!seen.insert(e.painting_id).second) {
      throw ValidationError("duplicate painting_id '" + e.painting_id + "'");
    }
    out.paintings.push_back(std::move(e));
  }
  return out;
}

LibraryManifest load_manifest(const fs::path& path) {
  LibraryManifest m = parse_manifest(read_text(path), path.parent_path());
  for (const TrackEntry& t : m.tracks) {
    require_exists(t.audio_path);
    require_exists(t.artwork_path);
  }
  for (const PaintingEntry& p : m.paintings) require_exists(p.image_path);
  return m;
}

std::string manifest_to_json(const LibraryManifest& manifest, const fs::path& base_dir) {
  json tracks = json::array();
  for (const TrackEntry& t : manifest.tracks) {
    json e = {{"track_id", t.track_id},
              {"audio_path", relative_to(t.audio_path, base_dir)},
              {"artwork_path", relative_to(t.artwork_path, base_dir)},
              {"album_id", t.album_id}};
    if (t.class_id) e["class_id"] = *t.class_id;
    tracks.push_back(std::move(e));
  }
  json paintings = json::array();
  for (const PaintingEntry& p : manifest.paintings) {
    paintings.push_back({{"painting_id", p.painting_id},
                         {"image_path", relative_to(p.image_path, base_dir)}});
  }
  return json{{"tracks", tracks}, {"paintings", paintings}}.dump(2) + "\n";
}

void save_manifest(const LibraryManifest& manifest, const fs::path& path) {
  write_text(path, manifest_to_json(manifest, fs::absolute(path).parent_path()));
}

namespace {

bool has_extension(const fs::path& p, std::initializer_list<const char*> exts) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::any_of(exts.begin(), exts.end(), [&](const char* e) { return ext == e; });
}

std::optional<fs::path> find_image(const fs::path& stem) {
  for (const char* ext : {".png", ".bmp", ".PNG", ".BMP"}) {
    fs::path p = stem;
    p += ext;
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

std::vector<fs::path> sorted_files(const fs::path& dir, bool recursive,
                                   std::initializer_list<const char*> exts) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  auto add = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && has_extension(e.path(), exts)) out.push_back(e.path());
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) add(e);
  } else {
    for (const auto& e : fs::directory_iterator(dir)) add(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

LibraryManifest scan_library(const fs::path& dir) {
  const fs::path audio_dir = dir / "audio";
  if (!fs::is_directory(audio_dir)) throw IoError("no audio folder in '" + dir.string() + "'");
  LibraryManifest m;
  std::set<std::string> ids;
  for (const fs::path& audio : sorted_files(audio_dir, true, {".wav"})) {
    const fs::path rel = fs::relative(audio, audio_dir);
    TrackEntry t;
    t.track_id = rel.parent_path().empty() ? rel.stem().string()
                                           : (rel.parent_path() / rel.stem()).generic_string();
    t.album_id = rel.parent_path().empty() ? t.track_id : rel.begin()->string();
    t.audio_path = audio;
    auto art = find_image(dir / "artwork" / rel.parent_path() / rel.stem());
    if (!art) art = find_image(dir / "artwork" / t.album_id);
    if (!art) throw IoError("no artwork for track '" + t.track_id + "'");
    t.artwork_path = *art;
    if (!ids.insert(t.track_id).second) {
      throw ValidationError("duplicate track_id '" + t.track_id + "'");
    }
    m.tracks.push_back(std::move(t));
  }
  ids.clear();
  for (const fs::path& img : sorted_files(dir / "paintings", false, {".png", ".bmp"})) {
    PaintingEntry p{img.stem().string(), img};
    if (!ids.insert(p.painting_id).second) {
      throw ValidationError("duplicate painting_id '" + p.painting_id + "'");
    }
    m.paintings.push_back(std::move(p));
  }
  return m;
}

LabeledClipManifest parse_clip_manifest(const std::string& text, const fs::path& base_dir) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw ValidationError("clip manifest must be a JSON object");
  LabeledClipManifest out;
  for (const json& c : doc.value("classes", json::array())) {
    out.classes.push_back(c.get<std::string>());
  }
  for (const json& c : doc.value("clips", json::array())) {
    LabeledClipEntry e;
    e.path = resolve(base_dir, required_string(c, "path", "clip"));
    e.offset_seconds = c.value("offset", 0.0);
    if (!c.contains("class_id")) throw ValidationError("clip entry needs 'class_id'");
    e.class_id = c["class_id"].get<int>();
    if (e.class_id < 0 || e.class_id >= static_cast<int>(out.classes.size())) {
      throw ValidationError("clip class_id out of range: " + std::to_string(e.class_id));
    }
    if (e.offset_seconds < 0) throw ValidationError("clip offset must be non-negative");
    out.clips.push_back(std::move(e));
  }
  return out;
}

LabeledClipManifest load_clip_manifest(const fs::path& path) {
  LabeledClipManifest m = parse_clip_manifest(read_text(path), path.parent_path());
  for (const LabeledClipEntry& c : m.clips) require_exists(c.path);
  return m;
}

void save_clip_manifest(const LabeledClipManifest& manifest, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  json clips = json::array();
  for (const LabeledClipEntry& c : manifest.clips) {
    clips.push_back({{"path", relative_to(c.path, base)},
                     {"offset", c.offset_seconds},
                     {"class_id", c.class_id}});
  }
  write_text(path, json{{"classes", manifest.classes}, {"clips", clips}}.dump(2) + "\n");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace brushwork
