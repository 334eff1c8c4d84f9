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

#ifndef BRUSHWORK_AUDIO_FRONTEND_H_
#define BRUSHWORK_AUDIO_FRONTEND_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "brushwork/rng.h"

namespace brushwork {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 64000;  // 4 s at 16 kHz
inline constexpr double kClipSeconds = 4.0;

// Mono audio, samples in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Parses a RIFF/WAV file holding 16-bit PCM or 32-bit float samples and
// averages all channels to mono. Throws DecodeError for malformed files and
// UnsupportedFormatError for other encodings.
AudioClip decode_wav(std::span<const std::byte> raw);

// Band-limited (windowed-sinc) sample-rate conversion. Output length is
// round(n * target_rate / sample_rate); equal rates return the input.
AudioClip resample(const AudioClip& clip, int target_rate);

AudioClip decode_resample(std::span<const std::byte> raw,
                          int target_rate = kSampleRate);
AudioClip load_audio(const std::filesystem::path& path,
                     int target_rate = kSampleRate);

std::vector<std::byte> encode_wav_pcm16(const AudioClip& clip);
std::vector<std::byte> encode_wav_float32(const AudioClip& clip);

// Copies [start, start + count) samples, zero-filling past the end.
AudioClip slice(const AudioClip& clip, std::size_t start, std::size_t count);

// STFT / mel constants of the canonical audio representation.
struct MelConfig {
  static constexpr std::size_t kBins = 100;
  static constexpr std::size_t kFrames = 320;
  static constexpr std::size_t kWindow = 400;  // 25 ms
  static constexpr std::size_t kHop = 200;     // 12.5 ms
  static constexpr std::size_t kFftSize = 512;
  static constexpr std::size_t kSpectrumBins = kFftSize / 2 + 1;
  static constexpr double kMaxFrequency = 8000.0;
  static constexpr double kFloor = 1e-6;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters on the HTK mel scale over 0-8000 Hz, applied to
// power spectra. Triangles are linear in Hz between adjacent edge points
// and peak at 1 on their center frequency.
class MelFilterbank {
 public:
  static const MelFilterbank& standard();

  MelFilterbank(std::size_t bins, std::size_t fft_size, double sample_rate,
                double max_frequency);

  std::size_t bins() const { return centers_.size(); }
  const std::vector<double>& centers() const { return centers_; }
  // Dense [bins][spectrum bins] weight matrix.
  double weight(std::size_t filter, std::size_t fft_bin) const {
    return weights_[filter * spectrum_bins_ + fft_bin];
  }
  std::size_t spectrum_bins() const { return spectrum_bins_; }
  std::size_t first_bin(std::size_t filter) const { return first_[filter]; }
  std::size_t last_bin(std::size_t filter) const { return last_[filter]; }

  void apply(std::span<const double> power, std::span<double> out) const;

 private:
  std::size_t spectrum_bins_;
  std::vector<double> centers_;
  std::vector<double> weights_;
  std::vector<std::size_t> first_, last_;  // nonzero support, inclusive
};

// 100 x 320 log-mel matrix, bin-major (values[bin * 320 + frame]).
struct MelPatch {
  std::vector<float> values;
  std::vector<double> bin_centers;

  float at(std::size_t bin, std::size_t frame) const {
    return values[bin * MelConfig::kFrames + frame];
  }
  friend bool operator==(const MelPatch&, const MelPatch&) = default;
};

// Requires 16 kHz input of at most 64000 samples; shorter clips are
// zero-padded. Throws PreconditionError otherwise.
MelPatch mel_patch(const AudioClip& clip);

// Scales by 10^(db/20) and clips to [-1, 1].
AudioClip apply_gain_db(const AudioClip& clip, double db);

inline constexpr double kAugmentMinDb = -12.0;
inline constexpr double kAugmentMaxDb = 0.0;

// Random attenuation drawn uniformly from [-12, 0] dB.
AudioClip augment_audio(const AudioClip& clip, Rng& rng);

}  // namespace brushwork

#endif  // BRUSHWORK_AUDIO_FRONTEND_H_
