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

#include "brushwork/audio_frontend.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numbers>
#include <string>

#include "brushwork/byte_io.h"
#include "brushwork/errors.h"
#include "brushwork/network.h"

namespace brushwork {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

float clamp_unit(float v) { return std::clamp(v, -1.0f, 1.0f); }

}  // namespace

AudioClip decode_wav(std::span<const std::byte> raw) {
  ByteReader r(raw);
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const std::byte> data;
  bool have_data = false;
  try {
    if (r.str(4) != "RIFF") throw DecodeError("missing RIFF header");
    r.u32();
    if (r.str(4) != "WAVE") throw DecodeError("missing WAVE tag");
    while (r.remaining() >= 8 && !have_data) {
      const std::string id = r.str(4);
      const std::uint32_t size = r.u32();
      if (id == "fmt ") {
        if (size < 16) throw DecodeError("fmt chunk too short");
        ByteReader f(r.take(size));
        format = f.u16();
        channels = f.u16();
        rate = f.u32();
        f.u32();
        f.u16();
        bits = f.u16();
        if (format == kFormatExtensible) {
          if (size < 40) throw DecodeError("extensible fmt chunk too short");
          f.skip(8);
          format = f.u16();  // first two bytes of the subformat GUID
        }
        have_fmt = true;
      } else if (id == "data") {
        if (!have_fmt) throw DecodeError("data chunk before fmt chunk");
        data = r.take(std::min<std::size_t>(size, r.remaining()));
        have_data = true;
      } else {
        r.skip(std::min<std::size_t>(size + (size & 1u), r.remaining()));
      }
      if (id == "fmt " && (size & 1u) && r.remaining() > 0) r.skip(1);
    }
  } catch (const CorruptionError& e) {
    throw DecodeError(std::string("malformed WAV: ") + e.what());
  }
  if (!have_fmt || !have_data) throw DecodeError("WAV lacks fmt or data chunk");
  if (channels == 0 || rate == 0) throw DecodeError("WAV declares zero channels or rate");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedFormatError("unsupported WAV encoding (format " +
                                 std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits)");
  }
  const std::size_t frame_bytes = channels * (bits / 8);
  const std::size_t frames = data.size() / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const std::byte* p = data.data() + i * frame_bytes + ch * (bits / 8);
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += v / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        if (!std::isfinite(v)) throw DecodeError("non-finite float sample");
        acc += v;
      }
    }
    clip.samples[i] = clamp_unit(static_cast<float>(acc / channels));
  }
  return clip;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw PreconditionError("target sample rate must be positive");
  if (clip.sample_rate <= 0) throw PreconditionError("clip has no sample rate");
  if (target_rate == clip.sample_rate) return clip;

  const std::size_t n_in = clip.samples.size();
  const auto n_out = static_cast<std::size_t>(std::llround(
      static_cast<double>(n_in) * target_rate / clip.sample_rate));
  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  // Cutoff relative to the input Nyquist; below 1 when downsampling.
  const double cutoff = std::min(1.0, 1.0 / step) * 0.95;
  constexpr double kZeroCrossings = 16.0;
  const double half_width = kZeroCrossings / cutoff;

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double center = static_cast<double>(i) * step;
    const long lo = static_cast<long>(std::ceil(center - half_width));
    const long hi = static_cast<long>(std::floor(center + half_width));
    double acc = 0.0, norm = 0.0;
    for (long j = std::max(lo, 0L); j <= hi && j < static_cast<long>(n_in); ++j) {
      const double x = static_cast<double>(j) - center;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      // Blackman window over [-half_width, half_width].
      const double u = (x / half_width + 1.0) * 0.5;
      const double win = 0.42 - 0.5 * std::cos(2 * std::numbers::pi * u) +
                         0.08 * std::cos(4 * std::numbers::pi * u);
      const double wgt = sinc * win;
      acc += wgt * clip.samples[static_cast<std::size_t>(j)];
      norm += wgt;
    }
    out.samples[i] = clamp_unit(norm > 0 ? static_cast<float>(acc / norm) : 0.0f);
  }
  return out;
}

AudioClip decode_resample(std::span<const std::byte> raw, int target_rate) {
  if (target_rate <= 0) throw PreconditionError("target sample rate must be positive");
  return resample(decode_wav(raw), target_rate);
}

AudioClip load_audio(const std::filesystem::path& path, int target_rate) {
  try {
    return decode_resample(read_file(path), target_rate);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

namespace {

std::vector<std::byte> encode_wav(const AudioClip& clip, bool float32) {
  const std::uint16_t bits = float32 ? 32 : 16;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  ByteWriter w;
  w.str("RIFF");
  w.u32(36 + data_bytes);
  w.str("WAVE");
  w.str("fmt ");
  w.u32(16);
  w.u16(float32 ? kFormatFloat : kFormatPcm);
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(clip.sample_rate));
  w.u32(static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  w.u16(bits / 8);
  w.u16(bits);
  w.str("data");
  w.u32(data_bytes);
  for (float s : clip.samples) {
    const float v = clamp_unit(s);
    if (float32) {
      w.f32(v);
    } else {
      w.i16(static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0f, -32768.0f, 32767.0f))));
    }
  }
  return w.take();
}

}  // namespace

std::vector<std::byte> encode_wav_pcm16(const AudioClip& clip) {
  return encode_wav(clip, false);
}

std::vector<std::byte> encode_wav_float32(const AudioClip& clip) {
  return encode_wav(clip, true);
}

AudioClip slice(const AudioClip& clip, std::size_t start, std::size_t count) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(count, 0.0f);
  if (start < clip.samples.size()) {
    const std::size_t n = std::min(count, clip.samples.size() - start);
    std::copy_n(clip.samples.begin() + static_cast<long>(start), n, out.samples.begin());
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t bins, std::size_t fft_size,
                             double sample_rate, double max_frequency)
    : spectrum_bins_(fft_size / 2 + 1) {
  const double mel_max = hz_to_mel(max_frequency);
  std::vector<double> edges(bins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / (bins + 1));
  }
  centers_.assign(edges.begin() + 1, edges.end() - 1);
  weights_.assign(bins * spectrum_bins_, 0.0);
  first_.assign(bins, 0);
  last_.assign(bins, 0);
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  for (std::size_t m = 0; m < bins; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < spectrum_bins_; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > left && f < center) {
        w = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        w = (right - f) / (right - center);
      }
      if (w > 0.0) {
        weights_[m * spectrum_bins_ + k] = w;
        if (!any) first_[m] = k;
        last_[m] = k;
        any = true;
      }
    }
  }
}

const MelFilterbank& MelFilterbank::standard() {
  static const MelFilterbank bank(MelConfig::kBins, MelConfig::kFftSize,
                                  kSampleRate, MelConfig::kMaxFrequency);
  return bank;
}

void MelFilterbank::apply(std::span<const double> power,
                          std::span<double> out) const {
  for (std::size_t m = 0; m < bins(); ++m) {
    double acc = 0.0;
    for (std::size_t k = first_[m]; k <= last_[m]; ++k) {
      acc += weights_[m * spectrum_bins_ + k] * power[k];
    }
    out[m] = acc;
  }
}

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// One r2c plan shared by all callers; fftw_execute_dft_r2c is thread-safe
// on distinct arrays.
const fftw_plan& forward_plan() {
  static const fftw_plan plan = [] {
    std::unique_ptr<double, FftwFree> in(
        static_cast<double*>(fftw_malloc(sizeof(double) * MelConfig::kFftSize)));
    std::unique_ptr<fftw_complex, FftwFree> out(static_cast<fftw_complex*>(
        fftw_malloc(sizeof(fftw_complex) * MelConfig::kSpectrumBins)));
    return fftw_plan_dft_r2c_1d(static_cast<int>(MelConfig::kFftSize), in.get(),
                                out.get(), FFTW_ESTIMATE);
  }();
  return plan;
}

const std::vector<double>& hann_window() {
  static const std::vector<double> window = [] {
    std::vector<double> w(MelConfig::kWindow);
    for (std::size_t n = 0; n < w.size(); ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / MelConfig::kWindow);
    }
    return w;
  }();
  return window;
}

}  // namespace

MelPatch mel_patch(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) {
    throw PreconditionError("mel_patch needs 16000 Hz audio, got " +
                            std::to_string(clip.sample_rate));
  }
  if (clip.samples.size() > kClipSamples) {
    throw PreconditionError("mel_patch clip longer than 64000 samples (" +
                            std::to_string(clip.samples.size()) + ")");
  }
  const MelFilterbank& bank = MelFilterbank::standard();
  const auto& window = hann_window();
  const fftw_plan& plan = forward_plan();

  std::unique_ptr<double, FftwFree> frame(
      static_cast<double*>(fftw_malloc(sizeof(double) * MelConfig::kFftSize)));
  std::unique_ptr<fftw_complex, FftwFree> spectrum(static_cast<fftw_complex*>(
      fftw_malloc(sizeof(fftw_complex) * MelConfig::kSpectrumBins)));
  std::vector<double> power(MelConfig::kSpectrumBins), mel(MelConfig::kBins);

  MelPatch patch;
  patch.values.resize(MelConfig::kBins * MelConfig::kFrames);
  patch.bin_centers = bank.centers();
  const std::size_t n = clip.samples.size();
  for (std::size_t t = 0; t < MelConfig::kFrames; ++t) {
    const std::size_t start = t * MelConfig::kHop;
    double* f = frame.get();
    std::fill_n(f, MelConfig::kFftSize, 0.0);
    for (std::size_t i = 0; i < MelConfig::kWindow && start + i < n; ++i) {
      f[i] = clip.samples[start + i] * window[i];
    }
    fftw_execute_dft_r2c(plan, f, spectrum.get());
    for (std::size_t k = 0; k < MelConfig::kSpectrumBins; ++k) {
      const double re = spectrum.get()[k][0], im = spectrum.get()[k][1];
      power[k] = re * re + im * im;
    }
    bank.apply(power, mel);
    for (std::size_t m = 0; m < MelConfig::kBins; ++m) {
      patch.values[m * MelConfig::kFrames + t] =
          static_cast<float>(std::log(mel[m] + MelConfig::kFloor));
    }
  }
  return patch;
}

AudioClip apply_gain_db(const AudioClip& clip, double db) {
  const auto gain = static_cast<float>(std::pow(10.0, db / 20.0));
  AudioClip out = clip;
  for (float& s : out.samples) s = clamp_unit(s * gain);
  return out;
}

AudioClip augment_audio(const AudioClip& clip, Rng& rng) {
  return apply_gain_db(clip, rng.uniform(kAugmentMinDb, kAugmentMaxDb));
}

}  // namespace brushwork
