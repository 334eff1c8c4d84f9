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

#ifndef BRUSHWORK_IMAGE_FRONTEND_H_
#define BRUSHWORK_IMAGE_FRONTEND_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "brushwork/rng.h"

namespace brushwork {

// 8-bit interleaved RGB, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t* pixel(std::size_t x, std::size_t y) {
    return pixels.data() + (y * width + x) * 3;
  }
  const std::uint8_t* pixel(std::size_t x, std::size_t y) const {
    return pixels.data() + (y * width + x) * 3;
  }
};

// PNG (any color type, via libpng) or uncompressed BMP (8/24/32 bit).
// Grayscale is expanded to RGB. Throws DecodeError.
RgbImage decode_image(std::span<const std::byte> raw);
std::vector<std::byte> encode_png(const RgbImage& image);
std::vector<std::byte> encode_bmp(const RgbImage& image);

inline constexpr std::size_t kImageSide = 224;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kMinImageSide = 8;

// 224 x 224 x 3 image, HWC, standardized per channel as (x - 0.5) / 0.5
// from [0, 1] pixel values.
struct ImageTensor {
  std::vector<float> values;

  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return values[(y * kImageSide + x) * kImageChannels + c];
  }
  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

// Bilinear resize of an HWC float buffer (half-pixel centers, edge clamp).
// Equal sizes copy the input unchanged.
std::vector<float> resize_bilinear(std::span<const float> src,
                                   std::size_t height, std::size_t width,
                                   std::size_t channels, std::size_t out_height,
                                   std::size_t out_width);

ImageTensor to_image_tensor(const RgbImage& image);
ImageTensor ingest_image(std::span<const std::byte> raw);
ImageTensor load_image(const std::filesystem::path& path);

std::uint64_t content_hash(const ImageTensor& image);

struct ImageAugmentation {
  bool flip = false;
  double area_fraction = 1.0;  // kept crop area, aspect preserved
  double offset_x = 0.0;       // crop position in [0, 1) of the slack
  double offset_y = 0.0;
};

inline constexpr double kMinCropFraction = 0.8;

ImageTensor flip_horizontal(const ImageTensor& image);
ImageTensor crop_resize(const ImageTensor& image, double area_fraction,
                        double offset_x, double offset_y);
ImageAugmentation draw_image_augmentation(Rng& rng);
ImageTensor apply_augmentation(const ImageTensor& image,
                               const ImageAugmentation& aug);
// Horizontal flip with probability 0.5, then a random crop keeping
// [0.8, 1.0] of the area resized back to 224 x 224.
ImageTensor augment_image(const ImageTensor& image, Rng& rng);

}  // namespace brushwork

#endif  // BRUSHWORK_IMAGE_FRONTEND_H_
