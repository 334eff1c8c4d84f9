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

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "brushwork/errors.h"
#include "brushwork/manifest.h"
#include "brushwork/network.h"
#include "brushwork/toy_corpus.h"

namespace brushwork {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const char* name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Hue from the opponent-colour angle, in turns.
double opponent_hue(double r, double g, double b) {
  const double h = std::atan2(std::sqrt(3.0) * (g - b), 2.0 * r - g - b) / (2.0 * std::numbers::pi);
  return h < 0.0 ? h + 1.0 : h;
}

double circular_distance(double a, double b) {
  const double d = std::abs(a - b);
  return std::min(d, 1.0 - d);
}

double spectral_centroid(const std::vector<float>& x, std::size_t start, std::size_t n) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
      acc += w * x[start + i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    }
    const double e = std::norm(acc);
    num += e * k * kSampleRate / n;
    den += e;
  }
  return num / den;
}

}  // namespace

TEST_CASE("library manifest parsing resolves paths and validates ids") {
  const std::string text = R"({
    "tracks": [
      {"track_id": "a", "audio_path": "audio/a.wav", "artwork_path": "/abs/a.png",
       "album_id": "x", "class_id": 2},
      {"track_id": "b", "audio_path": "b.wav", "artwork_path": "b.png", "album_id": "y"}
    ],
    "paintings": [{"painting_id": "p", "image_path": "p.png"}]
  })";
  const LibraryManifest m = parse_manifest(text, "/base");
  REQUIRE(m.tracks.size() == 2);
  CHECK(m.tracks[0].audio_path == fs::path("/base/audio/a.wav"));
  CHECK(m.tracks[0].artwork_path == fs::path("/abs/a.png"));
  CHECK(m.tracks[0].class_id == 2);
  CHECK_FALSE(m.tracks[1].class_id.has_value());
  CHECK(m.paintings.at(0).image_path == fs::path("/base/p.png"));

  CHECK_THROWS_AS(parse_manifest("{not json", "/"), ValidationError);
  CHECK_THROWS_AS(parse_manifest(R"({"tracks":[{"track_id":"a"}]})", "/"), ValidationError);
  const std::string dup = R"({"tracks":[
    {"track_id":"a","audio_path":"1","artwork_path":"1","album_id":"x"},
    {"track_id":"a","audio_path":"2","artwork_path":"2","album_id":"x"}]})";
  CHECK_THROWS_AS(parse_manifest(dup, "/"), ValidationError);
}

TEST_CASE("manifest save and load round trip with file checks") {
  const fs::path dir = fresh_dir("bw_manifest_test");
  write_text(dir / "a.wav", "x");
  write_text(dir / "a.png", "x");
  LibraryManifest m;
  m.tracks.push_back({"a", dir / "a.wav", dir / "a.png", "alb", 1});
  save_manifest(m, dir / "lib.json");
  CHECK(read_text(dir / "lib.json").find("\"a.wav\"") != std::string::npos);
  const LibraryManifest back = load_manifest(dir / "lib.json");
  CHECK(back.tracks.at(0).audio_path == m.tracks[0].audio_path);
  CHECK(back.tracks.at(0).class_id == 1);
  fs::remove(dir / "a.png");
  CHECK_THROWS_AS(load_manifest(dir / "lib.json"), IoError);
  CHECK_THROWS_AS(load_manifest(dir / "missing.json"), IoError);
}

TEST_CASE("clip manifest round trip and class range") {
  const fs::path dir = fresh_dir("bw_clip_manifest_test");
  write_text(dir / "c.wav", "x");
  LabeledClipManifest m{{"tones", "noise"}, {{dir / "c.wav", 4.0, 1}, {dir / "c.wav", 0.0, 0}}};
  save_clip_manifest(m, dir / "clips.json");
  const LabeledClipManifest back = load_clip_manifest(dir / "clips.json");
  CHECK(back.classes == m.classes);
  REQUIRE(back.clips.size() == 2);
  CHECK(back.clips[0].offset_seconds == 4.0);
  CHECK(back.clips[0].class_id == 1);
  CHECK_THROWS_AS(parse_clip_manifest(R"({"classes":["a"],"clips":[{"path":"x","class_id":1}]})", "/"),
                  ValidationError);
}

TEST_CASE("hsv conversion round trips") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double h = rng.uniform(), s = rng.uniform(0.05, 1.0), v = rng.uniform(0.05, 1.0);
    double r, g, b, h2, s2, v2;
    hsv_to_rgb(h, s, v, r, g, b);
    rgb_to_hsv(r, g, b, h2, s2, v2);
    CHECK(circular_distance(h, h2) < 1e-9);
    CHECK(s2 == doctest::Approx(s));
    CHECK(v2 == doctest::Approx(v));
  }
}

TEST_CASE("toy artwork hue sits in its class band") {
  const std::size_t classes = 4;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      Rng rng(seed * 10 + c);
      const RgbImage img = toy_artwork(c, classes, rng, 96);
      double sx = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        const double r = img.pixels[i] / 255.0, g = img.pixels[i + 1] / 255.0,
                     b = img.pixels[i + 2] / 255.0;
        const double h = opponent_hue(r, g, b) * 2.0 * std::numbers::pi;
        const double chroma = std::max({r, g, b}) - std::min({r, g, b});
        sx += chroma * std::cos(h);
        sy += chroma * std::sin(h);
      }
      double mean = std::atan2(sy, sx) / (2.0 * std::numbers::pi);
      if (mean < 0.0) mean += 1.0;
      INFO("class " << c << " mean hue " << mean);
      CHECK(circular_distance(mean, toy_hue(c, classes)) < 0.5 / classes);
    }
  }
}

TEST_CASE("toy track audio energy sits in its spectral band") {
  const std::size_t classes = 4;
  for (std::size_t c = 0; c < classes; ++c) {
    Rng rng(100 + c);
    const AudioClip clip = toy_track_audio(c, classes, 4.0, rng);
    CHECK(clip.samples.size() == kClipSamples);
    const double centroid = spectral_centroid(clip.samples, 16000, 2048);
    INFO("class " << c << " centroid " << centroid);
    CHECK(centroid > toy_band_low(c, classes));
    CHECK(centroid < toy_band_high(c, classes));
  }
  CHECK(toy_band_low(0, 4) == doctest::Approx(250.0));
  CHECK(toy_band_high(3, 4) == doctest::Approx(6000.0));
}

TEST_CASE("labeled toy clips are four seconds and bounded") {
  Rng rng(5);
  for (std::size_t k = 0; k < kToyClipKinds; ++k) {
    const AudioClip c = toy_labeled_clip(static_cast<ToyClipKind>(k), rng);
    CHECK(c.samples.size() == kClipSamples);
    float peak = 0.0f;
    for (float v : c.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 0.8f + 1e-6f);
    CHECK(peak >= 0.1f - 1e-6f);
  }
}

TEST_CASE("toy corpus generation is byte-identical for a seed") {
  ToyConfig cfg;
  cfg.tracks = 4;
  cfg.classes = 2;
  cfg.paintings = 2;
  cfg.track_seconds = 4.0;
  cfg.clips_per_class = 10;
  cfg.seed = 7;
  const fs::path a = fresh_dir("bw_toy_a");
  const fs::path b = fresh_dir("bw_toy_b");
  const ToyCorpus ca = generate_toy_corpus(a, cfg);
  generate_toy_corpus(b, cfg);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), a);
    CHECK(read_file(e.path()) == read_file(b / rel));
  }
  CHECK(files == 4 * 2 + 2 + 3 + 2);

  const LibraryManifest m = load_manifest(ca.manifest_path);
  REQUIRE(m.tracks.size() == 4);
  CHECK(m.tracks[1].class_id == 1);
  CHECK(m.tracks[0].album_id == m.tracks[1].album_id);
  CHECK(m.tracks[1].album_id != m.tracks[2].album_id);
  CHECK(load_clip_manifest(ca.clip_manifest_path).clips.size() == 30);

  cfg.seed = 8;
  const fs::path c = fresh_dir("bw_toy_c");
  generate_toy_corpus(c, cfg);
  CHECK(read_file(a / "audio" / "track_000.wav") != read_file(c / "audio" / "track_000.wav"));
}

}  // namespace brushwork
