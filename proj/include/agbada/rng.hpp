#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <variant>

#include "agbada/errors.hpp"
#include "agbada/tensor.hpp"

namespace agbada {

// Consumers of randomness; each draws from its own stream.
enum class Stream : std::uint64_t {
  Split = 1,
  Init = 2,
  Augment = 3,
  Dropout = 4,
  Shuffle = 5,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds extra keys (epoch, row id, ...) into a seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = seed;
  std::uint64_t out = splitmix64(state);
  for (auto k : keys) {
    state ^= k + 0x632be59bd9b4e019ULL;
    out ^= splitmix64(state);
  }
  return out;
}

// PCG32 (XSH-RR 64/32), state and increment seeded through SplitMix64.
class Rng {
public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed;
    const std::uint64_t init_state = splitmix64(sm);
    std::uint64_t st = stream;
    inc_ = (splitmix64(st) << 1u) | 1u;
    state_ = 0;
    next_u32();
    state_ += init_state;
    next_u32();
  }

  Rng(std::uint64_t seed, Stream stream) : Rng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    const std::uint64_t hi = next_u32() >> 5;  // 27 bits
    const std::uint64_t lo = next_u32() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Box-Muller; the second variate of each pair is kept for the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n) without modulo bias.
  std::uint32_t below(std::uint32_t n) {
    if (n == 0) throw ParameterError("Rng::below requires n >= 1");
    const std::uint32_t threshold = (0u - n) % n;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % n;
    }
  }

private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct Uniform {
  double a = 0.0;
  double b = 1.0;
};

struct Normal {
  double mean = 0.0;
  double stddev = 1.0;
};

using Distribution = std::variant<Uniform, Normal>;

template <typename T>
Tensor<T> fill_random(const Shape& shape, const Distribution& dist, Rng& rng) {
  Tensor<T> out(shape);
  auto values = out.data();
  if (const auto* u = std::get_if<Uniform>(&dist)) {
    if (!(u->a < u->b)) throw ParameterError("uniform distribution requires a < b");
    for (auto& v : values) v = static_cast<T>(rng.uniform(u->a, u->b));
  } else {
    const auto& n = std::get<Normal>(dist);
    if (!(n.stddev > 0.0)) throw ParameterError("normal distribution requires sigma > 0");
    for (auto& v : values) v = static_cast<T>(n.mean + n.stddev * rng.normal());
  }
  return out;
}

// Fisher-Yates shuffle driven by the given generator.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint32_t>(last - first);
  for (std::uint32_t i = n; i > 1; --i) {
    const std::uint32_t j = rng.below(i);
    std::iter_swap(first + (i - 1), first + j);
  }
}

}  // namespace agbada
