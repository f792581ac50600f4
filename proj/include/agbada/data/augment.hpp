#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "agbada/errors.hpp"
#include "agbada/rng.hpp"
#include "agbada/tensor.hpp"

namespace agbada::data {

struct AugmentConfig {
  double horizontal_flip_prob = 0.5;
  double rotation_deg_max = 15.0;
  double shift_frac_max = 0.1;
  double zoom_frac_max = 0.1;
  bool enabled = true;

  void validate() const {
    if (!(horizontal_flip_prob >= 0.0 && horizontal_flip_prob <= 1.0)) {
      throw ParameterError("flip probability must be in [0,1]");
    }
    if (!(rotation_deg_max >= 0.0) || !(shift_frac_max >= 0.0) || !(zoom_frac_max >= 0.0)) {
      throw ParameterError("augmentation magnitudes must be >= 0");
    }
    if (zoom_frac_max >= 1.0) throw ParameterError("zoom fraction must be < 1");
  }

  static AugmentConfig none() { return {0.0, 0.0, 0.0, 0.0, false}; }
};

// The random draws for one augmentation, in application order.
struct AugmentDraw {
  bool flip = false;
  double angle_deg = 0.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;
  double zoom = 1.0;
};

// Always consumes the same number of draws so later samples do not depend on
// which transforms happened to be active.
inline AugmentDraw draw_augmentation(const AugmentConfig& cfg, std::size_t height, std::size_t width, Rng& rng) {
  auto symmetric = [&](double max) { return (2.0 * rng.uniform() - 1.0) * max; };
  AugmentDraw d;
  d.flip = rng.uniform() < cfg.horizontal_flip_prob;
  d.angle_deg = symmetric(cfg.rotation_deg_max);
  d.shift_x = symmetric(cfg.shift_frac_max) * static_cast<double>(width);
  d.shift_y = symmetric(cfg.shift_frac_max) * static_cast<double>(height);
  d.zoom = 1.0 + symmetric(cfg.zoom_frac_max);
  return d;
}

// Applies flip, then rotation, translation and zoom about the image centre.
// Each output pixel is sampled bilinearly from the source at the inverse-mapped
// position; coordinates outside the image clamp to the nearest edge.
template <typename T>
Tensor<T> apply_augmentation(const Tensor<T>& img, const AugmentDraw& d) {
  if (img.rank() != 3) throw DimensionError("augment expects (C,H,W), got " + shape_string(img.shape()));
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);

  Tensor<T> src = img;
  if (d.flip) {
    for (std::size_t plane = 0; plane < c * h; ++plane) {
      T* row = src.data().data() + plane * w;
      std::reverse(row, row + w);
    }
  }
  const double theta = d.angle_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double max_x = static_cast<double>(w - 1), max_y = static_cast<double>(h - 1);

  Tensor<T> out({c, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      // undo zoom, then translation, then rotation
      const double px = (static_cast<double>(x) - cx) / d.zoom - d.shift_x;
      const double py = (static_cast<double>(y) - cy) / d.zoom - d.shift_y;
      const double sx = std::clamp(cos_t * px + sin_t * py + cx, 0.0, max_x);
      const double sy = std::clamp(-sin_t * px + cos_t * py + cy, 0.0, max_y);
      const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double wx = sx - static_cast<double>(x0), wy = sy - static_cast<double>(y0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* p = src.data().data() + ch * h * w;
        const double top = (1.0 - wx) * p[y0 * w + x0] + wx * p[y0 * w + x1];
        const double bottom = (1.0 - wx) * p[y1 * w + x0] + wx * p[y1 * w + x1];
        const double v = (1.0 - wy) * top + wy * bottom;
        out[(ch * h + y) * w + x] = static_cast<T>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (img.rank() != 3) throw DimensionError("augment expects (C,H,W), got " + shape_string(img.shape()));
  if (!cfg.enabled) return img;
  return apply_augmentation(img, draw_augmentation(cfg, img.dim(1), img.dim(2), rng));
}

}  // namespace agbada::data
