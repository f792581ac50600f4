#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "agbada/data/image.hpp"
#include "agbada/data/index.hpp"
#include "agbada/errors.hpp"
#include "agbada/rng.hpp"

namespace agbada::data {

// A generated two-class corpus in the label-index layout. Female samples are a
// warm background with a filled disc; Male samples a cool background with
// vertical stripes. Positions, sizes and pixel noise vary per image.
struct SyntheticCorpusSpec {
  std::size_t count = 400;
  double female_fraction = 0.625;
  std::size_t size = 180;
  std::uint64_t seed = 1;
};

inline RgbImage synthetic_image(bool male, std::size_t size, Rng& rng) {
  RgbImage img;
  img.width = img.height = size;
  img.pixels.resize(size * size * 3);
  const double s = static_cast<double>(size);
  auto jitter = [&](double base, double spread) { return base + (2.0 * rng.uniform() - 1.0) * spread; };
  const double bg[3] = {male ? jitter(60, 25) : jitter(200, 25), jitter(110, 25), male ? jitter(200, 25) : jitter(70, 25)};
  const double fg[3] = {male ? jitter(30, 20) : jitter(240, 15), jitter(male ? 60 : 150, 30), male ? jitter(120, 30) : jitter(180, 30)};
  const double cx = jitter(s / 2, s / 6), cy = jitter(s / 2, s / 6), radius = jitter(s / 4, s / 10);
  const double period = jitter(s / 8, s / 24), phase = rng.uniform() * period;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      bool on;
      if (male) {
        on = std::fmod(static_cast<double>(x) + phase, period) < period / 2;
      } else {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        on = dx * dx + dy * dy < radius * radius;
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = (on ? fg[ch] : bg[ch]) + (2.0 * rng.uniform() - 1.0) * 20.0;
        img.pixels[(y * size + x) * 3 + ch] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return img;
}

// Writes PNGs plus `index.csv` into `dir`; returns the index rows. The first
// round(count * female_fraction) rows are Female.
inline std::vector<IndexRow> write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpusSpec& spec) {
  std::filesystem::create_directories(dir);
  const auto females = static_cast<std::size_t>(std::llround(static_cast<double>(spec.count) * spec.female_fraction));
  std::vector<IndexRow> rows;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const bool male = i >= females;
    IndexRow row;
    row.clothing = male ? "Agbada" : "Wrapper and Blouse";
    row.gender = male ? "Male" : "Female";
    row.image_id = row.clothing + "_" + std::to_string(i + 1) + ".png";
    Rng rng(mix_seed(spec.seed, {i}), Stream::Augment);
    write_png((dir / row.image_id).string(), synthetic_image(male, spec.size, rng));
    rows.push_back(std::move(row));
  }
  std::ofstream out(dir / "index.csv");
  if (!out) throw IoError("cannot write " + (dir / "index.csv").string());
  out << format_index(rows);
  return rows;
}

}  // namespace agbada::data
