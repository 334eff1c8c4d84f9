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

#include "brushwork/image_frontend.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "brushwork/byte_io.h"
#include "brushwork/errors.h"
#include "brushwork/hash.h"
#include "brushwork/network.h"

namespace brushwork {

namespace {

bool is_png(std::span<const std::byte> raw) {
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return raw.size() >= 8 && std::memcmp(raw.data(), kSig, 8) == 0;
}

RgbImage decode_png(std::span<const std::byte> raw) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, raw.data(), raw.size())) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DecodeError("PNG: " + msg);
  }
  img.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DecodeError("PNG: " + msg);
  }
  return out;
}

RgbImage decode_bmp(std::span<const std::byte> raw) {
  try {
    ByteReader r(raw);
    r.skip(10);
    const std::uint32_t data_offset = r.u32();
    const std::uint32_t header_size = r.u32();
    if (header_size < 40) throw DecodeError("BMP: unsupported header");
    const auto width = static_cast<std::int32_t>(r.u32());
    const auto height = static_cast<std::int32_t>(r.u32());
    r.u16();
    const std::uint16_t bits = r.u16();
    const std::uint32_t compression = r.u32();
    r.skip(12);
    std::uint32_t colors_used = r.u32();
    if (compression != 0 && !(compression == 3 && bits == 32)) {
      throw DecodeError("BMP: compressed bitmaps are not supported");
    }
    if (width <= 0 || height == 0) throw DecodeError("BMP: bad dimensions");
    if (bits != 8 && bits != 24 && bits != 32) {
      throw DecodeError("BMP: unsupported bit depth " + std::to_string(bits));
    }
    std::vector<std::uint8_t> palette;
    if (bits == 8) {
      if (colors_used == 0) colors_used = 256;
      ByteReader p(raw.subspan(14 + header_size));
      for (std::uint32_t i = 0; i < colors_used; ++i) {
        const std::uint8_t b = p.u8(), g = p.u8(), rr = p.u8();
        p.u8();
        palette.insert(palette.end(), {rr, g, b});
      }
    }
    const bool bottom_up = height > 0;
    RgbImage out;
    out.width = static_cast<std::size_t>(width);
    out.height = static_cast<std::size_t>(std::abs(height));
    out.pixels.resize(out.width * out.height * 3);
    const std::size_t row_bytes = ((out.width * bits + 31) / 32) * 4;
    ByteReader px(raw.subspan(std::min<std::size_t>(data_offset, raw.size())));
    for (std::size_t row = 0; row < out.height; ++row) {
      const auto bytes = px.take(row_bytes);
      const std::size_t y = bottom_up ? out.height - 1 - row : row;
      for (std::size_t x = 0; x < out.width; ++x) {
        std::uint8_t* dst = out.pixel(x, y);
        if (bits == 8) {
          const auto idx = static_cast<std::size_t>(bytes[x]);
          if (idx * 3 + 2 >= palette.size()) throw DecodeError("BMP: palette index out of range");
          std::copy_n(palette.begin() + static_cast<long>(idx * 3), 3, dst);
        } else {
          const std::size_t stride = bits / 8;
          dst[0] = static_cast<std::uint8_t>(bytes[x * stride + 2]);
          dst[1] = static_cast<std::uint8_t>(bytes[x * stride + 1]);
          dst[2] = static_cast<std::uint8_t>(bytes[x * stride + 0]);
        }
      }
    }
    return out;
  } catch (const CorruptionError& e) {
    throw DecodeError(std::string("BMP truncated: ") + e.what());
  }
}

}  // namespace

RgbImage decode_image(std::span<const std::byte> raw) {
  if (is_png(raw)) return decode_png(raw);
  if (raw.size() >= 2 && raw[0] == std::byte{'B'} && raw[1] == std::byte{'M'}) {
    return decode_bmp(raw);
  }
  throw DecodeError("unrecognized image format (expected PNG or BMP)");
}

std::vector<std::byte> encode_png(const RgbImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode: ") + img.message);
  }
  std::vector<std::byte> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::byte> encode_bmp(const RgbImage& image) {
  const std::size_t row_bytes = ((image.width * 24 + 31) / 32) * 4;
  const auto data_size = static_cast<std::uint32_t>(row_bytes * image.height);
  ByteWriter w;
  w.str("BM");
  w.u32(54 + data_size);
  w.u32(0);
  w.u32(54);
  w.u32(40);
  w.u32(static_cast<std::uint32_t>(image.width));
  w.u32(static_cast<std::uint32_t>(image.height));
  w.u16(1);
  w.u16(24);
  w.u32(0);
  w.u32(data_size);
  w.u32(2835);
  w.u32(2835);
  w.u32(0);
  w.u32(0);
  for (std::size_t row = 0; row < image.height; ++row) {
    const std::size_t y = image.height - 1 - row;
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::uint8_t* p = image.pixel(x, y);
      w.u8(p[2]);
      w.u8(p[1]);
      w.u8(p[0]);
    }
    for (std::size_t pad = image.width * 3; pad < row_bytes; ++pad) w.u8(0);
  }
  return w.take();
}

std::vector<float> resize_bilinear(std::span<const float> src,
                                   std::size_t height, std::size_t width,
                                   std::size_t channels, std::size_t out_height,
                                   std::size_t out_width) {
  if (height == out_height && width == out_width) {
    return {src.begin(), src.end()};
  }
  std::vector<float> out(out_height * out_width * channels);
  const double sy = static_cast<double>(height) / out_height;
  const double sx = static_cast<double>(width) / out_width;
  for (std::size_t y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - x0;
      for (std::size_t c = 0; c < channels; ++c) {
        const double top = (1 - wx) * src[(y0 * width + x0) * channels + c] +
                           wx * src[(y0 * width + x1) * channels + c];
        const double bottom = (1 - wx) * src[(y1 * width + x0) * channels + c] +
                              wx * src[(y1 * width + x1) * channels + c];
        out[(y * out_width + x) * channels + c] =
            static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

ImageTensor to_image_tensor(const RgbImage& image) {
  if (image.width < kMinImageSide || image.height < kMinImageSide) {
    throw PreconditionError("image " + std::to_string(image.width) + "x" +
                            std::to_string(image.height) +
                            " is smaller than 8x8");
  }
  std::vector<float> unit(image.pixels.size());
  for (std::size_t i = 0; i < unit.size(); ++i) unit[i] = image.pixels[i] / 255.0f;
  ImageTensor out;
  out.values = resize_bilinear(unit, image.height, image.width, kImageChannels,
                               kImageSide, kImageSide);
  for (float& v : out.values) v = (v - 0.5f) / 0.5f;
  return out;
}

ImageTensor ingest_image(std::span<const std::byte> raw) {
  return to_image_tensor(decode_image(raw));
}

ImageTensor load_image(const std::filesystem::path& path) {
  try {
    return ingest_image(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::uint64_t content_hash(const ImageTensor& image) {
  Fnv1a h;
  h.update_values(std::span<const float>(image.values));
  return h.digest();
}

ImageTensor flip_horizontal(const ImageTensor& image) {
  ImageTensor out;
  out.values.resize(image.values.size());
  for (std::size_t y = 0; y < kImageSide; ++y) {
    for (std::size_t x = 0; x < kImageSide; ++x) {
      const std::size_t src = (y * kImageSide + (kImageSide - 1 - x)) * kImageChannels;
      const std::size_t dst = (y * kImageSide + x) * kImageChannels;
      std::copy_n(image.values.begin() + static_cast<long>(src), kImageChannels,
                  out.values.begin() + static_cast<long>(dst));
    }
  }
  return out;
}

ImageTensor crop_resize(const ImageTensor& image, double area_fraction,
                        double offset_x, double offset_y) {
  const double side = std::sqrt(std::clamp(area_fraction, 0.0, 1.0));
  const auto crop = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(side * kImageSide)), 1, kImageSide);
  if (crop == kImageSide) return image;
  const std::size_t slack = kImageSide - crop;
  const auto x0 = std::min(slack, static_cast<std::size_t>(offset_x * (slack + 1)));
  const auto y0 = std::min(slack, static_cast<std::size_t>(offset_y * (slack + 1)));
  std::vector<float> window(crop * crop * kImageChannels);
  for (std::size_t y = 0; y < crop; ++y) {
    const auto src = image.values.begin() +
                     static_cast<long>(((y0 + y) * kImageSide + x0) * kImageChannels);
    std::copy_n(src, crop * kImageChannels,
                window.begin() + static_cast<long>(y * crop * kImageChannels));
  }
  ImageTensor out;
  out.values = resize_bilinear(window, crop, crop, kImageChannels, kImageSide, kImageSide);
  return out;
}

ImageAugmentation draw_image_augmentation(Rng& rng) {
  ImageAugmentation aug;
  aug.flip = rng.bernoulli(0.5);
  aug.area_fraction = rng.uniform(kMinCropFraction, 1.0);
  aug.offset_x = rng.uniform();
  aug.offset_y = rng.uniform();
  return aug;
}

ImageTensor apply_augmentation(const ImageTensor& image,
                               const ImageAugmentation& aug) {
  const ImageTensor flipped = aug.flip ? flip_horizontal(image) : image;
  return crop_resize(flipped, aug.area_fraction, aug.offset_x, aug.offset_y);
}

ImageTensor augment_image(const ImageTensor& image, Rng& rng) {
  return apply_augmentation(image, draw_image_augmentation(rng));
}

}  // namespace brushwork
