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

#ifndef BRUSHWORK_TOY_CORPUS_H_
#define BRUSHWORK_TOY_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "brushwork/audio_frontend.h"
#include "brushwork/image_frontend.h"
#include "brushwork/manifest.h"
#include "brushwork/rng.h"

namespace brushwork {

// Synthetic library where class c pairs a hue band with a spectral band.
struct ToyConfig {
  std::size_t tracks = 20;
  std::size_t classes = 4;
  std::size_t paintings = 8;
  double track_seconds = 12.0;
  std::size_t clips_per_class = 100;  // labeled embedder set; 0 skips it
  std::uint64_t seed = 7;
};

struct ToyCorpus {
  std::filesystem::path manifest_path;       // library manifest
  std::filesystem::path clip_manifest_path;  // empty when not generated
  LibraryManifest library;
};

// Writes audio/, artwork/, paintings/, clips/, toy.json and clips.json
// under `out_dir`. Output bytes depend only on the config.
ToyCorpus generate_toy_corpus(const std::filesystem::path& out_dir,
                              const ToyConfig& config);

// Hue centre of class c in [0, 1).
double toy_hue(std::size_t class_id, std::size_t classes);
// Spectral band of class c in Hz; bands are log-spaced and disjoint.
double toy_band_low(std::size_t class_id, std::size_t classes);
double toy_band_high(std::size_t class_id, std::size_t classes);

RgbImage toy_artwork(std::size_t class_id, std::size_t classes, Rng& rng,
                     int side = 256);
AudioClip toy_track_audio(std::size_t class_id, std::size_t classes,
                          double seconds, Rng& rng);

enum class ToyClipKind { kTones = 0, kNoise = 1, kClicks = 2 };
inline constexpr std::size_t kToyClipKinds = 3;
// One 4 s clip at 16 kHz.
AudioClip toy_labeled_clip(ToyClipKind kind, Rng& rng);

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace brushwork

#endif  // BRUSHWORK_TOY_CORPUS_H_
