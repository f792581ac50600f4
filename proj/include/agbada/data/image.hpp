#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "agbada/errors.hpp"
#include "agbada/tensor.hpp"

namespace agbada::data {

// Interleaved 8-bit RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3
};

inline RgbImage read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot read image '" + path + "': " + msg);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw IoError("unsupported bit depth in '" + path + "' (expected 8-bit channels)");
  }
  // Read as RGBA and drop alpha ourselves; asking libpng for RGB would composite.
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("corrupt image '" + path + "': " + msg);
  }
  RgbImage out;
  out.width = image.width;
  out.height = image.height;
  out.pixels.resize(out.width * out.height * 3);
  for (std::size_t i = 0; i < out.width * out.height; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch) out.pixels[i * 3 + ch] = rgba[i * 4 + ch];
  return out;
}

inline void write_png(const std::string& path, const RgbImage& img) {
  if (img.pixels.size() != img.width * img.height * 3) throw DimensionError("RGB buffer does not match image size");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write image '" + path + "': " + msg);
  }
}

// Bilinear resample of a (C,H,W) tensor with half-pixel centres and edge clamping.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& img, std::size_t out_h, std::size_t out_w) {
  if (img.rank() != 3) throw DimensionError("resize expects (C,H,W), got " + shape_string(img.shape()));
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (h == out_h && w == out_w) return img;
  Tensor<T> out({c, out_h, out_w});
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t base = ch * h * w;
        const double top = (1.0 - wx) * img[base + y0 * w + x0] + wx * img[base + y0 * w + x1];
        const double bottom = (1.0 - wx) * img[base + y1 * w + x0] + wx * img[base + y1 * w + x1];
        out[(ch * out_h + y) * out_w + x] = static_cast<T>((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

// Interleaved RGB -> planar (3,H,W) scaled by 1/255.
inline Tensor<float> to_tensor(const RgbImage& img) {
  Tensor<float> t({3, img.height, img.width});
  const std::size_t plane = img.height * img.width;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch) t[ch * plane + i] = static_cast<float>(img.pixels[i * 3 + ch]) / 255.0f;
  return t;
}

// Loads an 8-bit RGB/RGBA PNG (alpha dropped) as (3,H,W) in [0,1], resized to
// the target size when it differs.
inline Tensor<float> load_image(const std::string& path, std::size_t target_h, std::size_t target_w) {
  return resize_bilinear(to_tensor(read_png(path)), target_h, target_w);
}

}  // namespace agbada::data
