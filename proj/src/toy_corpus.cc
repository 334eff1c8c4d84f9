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

#include "brushwork/toy_corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "brushwork/errors.h"
#include "brushwork/network.h"

namespace brushwork {
namespace {

namespace fs = std::filesystem;

constexpr double kLowestHz = 250.0;
constexpr double kHighestHz = 6000.0;
constexpr double kHueJitter = 0.25;    // fraction of the class hue width
constexpr double kSegmentSeconds = 0.25;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03zu", prefix, i);
  return buf;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void normalize_peak(std::vector<float>& x, double peak) {
  float m = 0.0f;
  for (float v : x) m = std::max(m, std::abs(v));
  if (m <= 0.0f) return;
  const float g = static_cast<float>(peak / m);
  for (float& v : x) v *= g;
}

}  // namespace

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);
  const double x = h * 6.0;
  const int sector = static_cast<int>(x) % 6;
  const double f = x - std::floor(x);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

double toy_hue(std::size_t class_id, std::size_t classes) {
  return static_cast<double>(class_id) / static_cast<double>(classes);
}

double toy_band_low(std::size_t class_id, std::size_t classes) {
  return kLowestHz * std::pow(kHighestHz / kLowestHz,
                              static_cast<double>(class_id) / classes);
}

double toy_band_high(std::size_t class_id, std::size_t classes) {
  return toy_band_low(class_id + 1, classes);
}

RgbImage toy_artwork(std::size_t class_id, std::size_t classes, Rng& rng, int side) {
  const double width = 1.0 / static_cast<double>(classes);
  const double base = toy_hue(class_id, classes) + rng.uniform(-0.5, 0.5) * kHueJitter * width;
  RgbImage img;
  img.width = side;
  img.height = side;
  img.pixels.resize(static_cast<std::size_t>(side) * side * 3);

  // Soft background gradient, then random rectangles in the same band.
  const double v0 = rng.uniform(0.3, 0.6);
  const double v1 = rng.uniform(0.6, 1.0);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double t = (x + y) / (2.0 * side);
      double r, g, b;
      hsv_to_rgb(base, 0.6, v0 + (v1 - v0) * t, r, g, b);
      std::uint8_t* px = &img.pixels[(static_cast<std::size_t>(y) * side + x) * 3];
      px[0] = to_byte(r), px[1] = to_byte(g), px[2] = to_byte(b);
    }
  }
  const int strokes = 6 + static_cast<int>(rng.below(10));
  for (int k = 0; k < strokes; ++k) {
    const double hue = base + rng.uniform(-0.5, 0.5) * kHueJitter * width;
    const double sat = rng.uniform(0.5, 1.0);
    const double val = rng.uniform(0.4, 1.0);
    const int w = 8 + static_cast<int>(rng.below(side / 3));
    const int h = 8 + static_cast<int>(rng.below(side / 3));
    const int x0 = static_cast<int>(rng.below(side - w));
    const int y0 = static_cast<int>(rng.below(side - h));
    double r, g, b;
    hsv_to_rgb(hue, sat, val, r, g, b);
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        std::uint8_t* px = &img.pixels[(static_cast<std::size_t>(y) * side + x) * 3];
        px[0] = to_byte(r), px[1] = to_byte(g), px[2] = to_byte(b);
      }
    }
  }
  return img;
}

AudioClip toy_track_audio(std::size_t class_id, std::size_t classes, double seconds,
                          Rng& rng) {
  const double lo = std::log(toy_band_low(class_id, classes));
  const double hi = std::log(toy_band_high(class_id, classes));
  const double margin = 0.1 * (hi - lo);
  const std::size_t n = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  const std::size_t seg = static_cast<std::size_t>(kSegmentSeconds * kSampleRate);
  std::vector<float> x(n, 0.0f);
  for (std::size_t start = 0; start < n; start += seg) {
    const std::size_t end = std::min(n, start + seg);
    const int tones = 2 + static_cast<int>(rng.below(3));
    for (int k = 0; k < tones; ++k) {
      const double f = std::exp(rng.uniform(lo + margin, hi - margin));
      const double amp = rng.uniform(0.2, 1.0);
      const double phase = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = start; i < end; ++i) {
        const double u = static_cast<double>(i - start) / static_cast<double>(end - start);
        const double env = std::sin(std::numbers::pi * u);
        x[i] += static_cast<float>(amp * env * std::sin(kTwoPi * f * i / kSampleRate + phase));
      }
    }
  }
  normalize_peak(x, 0.5);
  for (float& v : x) v += static_cast<float>(0.003 * rng.normal());
  return AudioClip{std::move(x), kSampleRate};
}

AudioClip toy_labeled_clip(ToyClipKind kind, Rng& rng) {
  std::vector<float> x(kClipSamples, 0.0f);
  switch (kind) {
    case ToyClipKind::kTones: {
      const int tones = 1 + static_cast<int>(rng.below(2));
      for (int k = 0; k < tones; ++k) {
        const double f = std::exp(rng.uniform(std::log(200.0), std::log(4000.0)));
        const double phase = rng.uniform(0.0, kTwoPi);
        for (std::size_t i = 0; i < x.size(); ++i) {
          x[i] += static_cast<float>(std::sin(kTwoPi * f * i / kSampleRate + phase));
        }
      }
      break;
    }
    case ToyClipKind::kNoise:
      for (float& v : x) v = static_cast<float>(rng.normal());
      break;
    case ToyClipKind::kClicks: {
      const double rate = rng.uniform(2.0, 8.0);
      const std::size_t period = static_cast<std::size_t>(kSampleRate / rate);
      const double decay = rng.uniform(0.002, 0.006) * kSampleRate;
      for (std::size_t t = rng.below(period); t < x.size(); t += period) {
        for (std::size_t i = t; i < std::min(x.size(), t + 200); ++i) {
          const double e = std::exp(-static_cast<double>(i - t) / decay);
          x[i] += static_cast<float>(e * rng.uniform(-1.0, 1.0));
        }
      }
      break;
    }
  }
  normalize_peak(x, rng.uniform(0.1, 0.8));
  return AudioClip{std::move(x), kSampleRate};
}

ToyCorpus generate_toy_corpus(const fs::path& out_dir, const ToyConfig& config) {
  if (config.classes < 2 || config.tracks < 2) {
    throw PreconditionError("toy corpus needs at least two classes and two tracks");
  }
  if (config.track_seconds < kClipSeconds) {
    throw PreconditionError("toy tracks must be at least 4 s long");
  }
  const fs::path root = fs::absolute(out_dir);
  for (const char* sub : {"audio", "artwork", "paintings", "clips"}) {
    fs::create_directories(root / sub);
  }
  const Rng master(config.seed);
  ToyCorpus corpus;
  for (std::size_t i = 0; i < config.tracks; ++i) {
    const std::size_t cls = i % config.classes;
    Rng rng = master.fork(1000 + i);
    TrackEntry t;
    t.track_id = numbered("track", i);
    t.album_id = numbered("album", i / 2);
    t.class_id = static_cast<int>(cls);
    t.artwork_path = root / "artwork" / (t.track_id + ".png");
    t.audio_path = root / "audio" / (t.track_id + ".wav");
    write_file(t.artwork_path, encode_png(toy_artwork(cls, config.classes, rng)));
    write_file(t.audio_path, encode_wav_pcm16(
                                 toy_track_audio(cls, config.classes, config.track_seconds, rng)));
    corpus.library.tracks.push_back(std::move(t));
  }
  for (std::size_t j = 0; j < config.paintings; ++j) {
    Rng rng = master.fork(5000 + j);
    PaintingEntry p;
    p.painting_id = numbered("painting", j);
    p.image_path = root / "paintings" / (p.painting_id + ".png");
    write_file(p.image_path, encode_png(toy_artwork(j % config.classes, config.classes, rng)));
    corpus.library.paintings.push_back(std::move(p));
  }
  corpus.manifest_path = root / "toy.json";
  save_manifest(corpus.library, corpus.manifest_path);

  if (config.clips_per_class > 0) {
    static const char* kNames[kToyClipKinds] = {"tones", "noise", "clicks"};
    LabeledClipManifest clips;
    for (std::size_t k = 0; k < kToyClipKinds; ++k) {
      clips.classes.push_back(kNames[k]);
      Rng rng = master.fork(9000 + k);
      AudioClip joined{{}, kSampleRate};
      joined.samples.reserve(config.clips_per_class * kClipSamples);
      const fs::path path = root / "clips" / (std::string(kNames[k]) + ".wav");
      for (std::size_t c = 0; c < config.clips_per_class; ++c) {
        const AudioClip clip = toy_labeled_clip(static_cast<ToyClipKind>(k), rng);
        joined.samples.insert(joined.samples.end(), clip.samples.begin(), clip.samples.end());
        clips.clips.push_back({path, static_cast<double>(c * kClipSeconds), static_cast<int>(k)});
      }
      write_file(path, encode_wav_pcm16(joined));
    }
    corpus.clip_manifest_path = root / "clips.json";
    save_clip_manifest(clips, corpus.clip_manifest_path);
  }
  return corpus;
}

}  // namespace brushwork
