#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "agbada/data/index.hpp"
#include "agbada/errors.hpp"
#include "agbada/rng.hpp"
#include "json.hpp"

namespace agbada::data {

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

using SplitFractions = std::array<double, 3>;

namespace detail {

// floor() that tolerates quotas like 79.99999999999999 from inexact fractions.
inline std::size_t floor_count(double quota) { return static_cast<std::size_t>(std::floor(quota + 1e-9)); }

// Largest-remainder rounding of `total * fractions`; ties go to the lower index.
inline std::array<std::size_t, 3> apportion(std::size_t total, const SplitFractions& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double quota = static_cast<double>(total) * fractions[k];
    counts[k] = floor_count(quota);
    rem[k] = std::max(0.0, quota - static_cast<double>(counts[k]));
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

}  // namespace detail

// Stratified split. Split totals are largest-remainder roundings of N; each
// (gender, split) cell is the floor or ceiling of its exact quota, so per-gender
// counts stay within 1 of proportional. Rows are shuffled within each gender by
// a seeded generator before being dealt out; each split lists row indices in
// ascending order.
inline SplitAssignment stratified_split(const std::vector<IndexRow>& rows, const SplitFractions& fractions,
                                        std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw ParameterError("split fractions must be non-negative");
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1, got " + std::to_string(sum));

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) groups[rows[i].gender].push_back(i);

  const auto totals = detail::apportion(rows.size(), fractions);

  struct Cell {
    std::array<std::size_t, 3> count{};
    std::array<double, 3> frac{};
    std::size_t extra = 0;
  };
  std::vector<Cell> cells;
  std::array<std::size_t, 3> demand = totals;
  for (const auto& [_, members] : groups) {
    Cell cell;
    std::size_t floor_sum = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double quota = static_cast<double>(members.size()) * fractions[k];
      cell.count[k] = detail::floor_count(quota);
      cell.frac[k] = std::max(0.0, quota - static_cast<double>(cell.count[k]));
      floor_sum += cell.count[k];
      demand[k] -= cell.count[k];
    }
    cell.extra = members.size() - floor_sum;
    cells.push_back(cell);
  }
  // Each group hands its leftover units to distinct splits, preferring the
  // splits with the most outstanding demand (Gale-Ryser greedy), then the
  // largest fractional remainder.
  for (auto& cell : cells) {
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      if (demand[a] != demand[b]) return demand[a] > demand[b];
      return cell.frac[a] > cell.frac[b];
    });
    for (std::size_t i = 0; i < cell.extra; ++i) {
      const std::size_t k = order[i];
      if (demand[k] == 0) throw ParameterError("stratified split rounding failed");
      ++cell.count[k];
      --demand[k];
    }
  }

  SplitAssignment out;
  out.seed = seed;
  std::size_t g = 0;
  for (const auto& [_, members] : groups) {
    std::vector<std::size_t> shuffled = members;
    Rng rng(mix_seed(seed, {g}), Stream::Split);
    shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto& c = cells[g++].count;
    auto it = shuffled.begin();
    out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(c[0]));
    it += static_cast<std::ptrdiff_t>(c[0]);
    out.val.insert(out.val.end(), it, it + static_cast<std::ptrdiff_t>(c[1]));
    it += static_cast<std::ptrdiff_t>(c[1]);
    out.test.insert(out.test.end(), it, it + static_cast<std::ptrdiff_t>(c[2]));
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline SplitAssignment stratified_split(const std::vector<IndexRow>& rows, std::uint64_t seed) {
  return stratified_split(rows, {0.8, 0.1, 0.1}, seed);
}

inline nlohmann::json split_to_json(const SplitAssignment& split) {
  return nlohmann::json{{"seed", split.seed}, {"train", split.train}, {"val", split.val}, {"test", split.test}};
}

inline SplitAssignment split_from_json(const nlohmann::json& j) {
  SplitAssignment s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.val = j.at("val").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

inline void save_split(const SplitAssignment& split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write split file '" + path + "'");
  out << split_to_json(split).dump(1) << '\n';
}

inline SplitAssignment load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read split file '" + path + "'");
  try {
    return split_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed split file '" + path + "': " + e.what());
  }
}

}  // namespace agbada::data
