#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agbada/data/augment.hpp"
#include "agbada/data/image.hpp"
#include "agbada/data/index.hpp"
#include "agbada/errors.hpp"
#include "agbada/rng.hpp"
#include "agbada/tensor.hpp"

namespace agbada::data {

struct Batch {
  Tensor<float> inputs;   // (N,3,H,W) in [0,1]
  Tensor<float> targets;  // (N,1) in {0,1}
  std::vector<std::size_t> row_ids;
};

inline std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  if (batch_size == 0) throw ParameterError("batch size must be >= 1");
  return (n + batch_size - 1) / batch_size;
}

// Produces the (C,H,W) image for an index row.
using ImageLoader = std::function<Tensor<float>(std::size_t row)>;

// Decodes each row's image once and keeps it in memory.
class ImageCache {
public:
  ImageCache(std::filesystem::path dir, const std::vector<IndexRow>& rows, std::size_t height, std::size_t width)
      : dir_(std::move(dir)), rows_(&rows), height_(height), width_(width) {}

  const Tensor<float>& get(std::size_t row) {
    auto it = cache_.find(row);
    if (it != cache_.end()) return it->second;
    const auto path = dir_ / rows_->at(row).image_id;
    return cache_.emplace(row, load_image(path.string(), height_, width_)).first->second;
  }

  ImageLoader loader() {
    return [this](std::size_t row) { return get(row); };
  }

private:
  std::filesystem::path dir_;
  const std::vector<IndexRow>* rows_;
  std::size_t height_, width_;
  std::map<std::size_t, Tensor<float>> cache_;
};

struct BatchOptions {
  std::size_t batch_size = 128;
  bool shuffle = false;
  std::uint64_t seed = 0;
  std::optional<AugmentConfig> augment;  // applied only when set and enabled
};

// Deterministic batch sequence over a subset of index rows. The order for an
// epoch derives from (seed, epoch); augmentation draws derive from
// (seed, epoch, row), so batch content never depends on evaluation order.
class BatchStream {
public:
  BatchStream(const std::vector<IndexRow>& rows, std::vector<std::size_t> members, ImageLoader loader,
              BatchOptions options)
      : rows_(&rows), members_(std::move(members)), loader_(std::move(loader)), options_(std::move(options)) {
    if (options_.batch_size == 0) throw ParameterError("batch size must be >= 1");
    if (options_.augment) options_.augment->validate();
    for (auto m : members_)
      if (m >= rows.size()) throw ParameterError("row id " + std::to_string(m) + " out of range");
    set_epoch(0);
  }

  std::size_t size() const { return members_.size(); }
  std::size_t steps() const { return steps_per_epoch(members_.size(), options_.batch_size); }
  const BatchOptions& options() const { return options_; }

  void set_epoch(int epoch) {
    epoch_ = epoch;
    order_ = members_;
    if (options_.shuffle) {
      Rng rng(mix_seed(options_.seed, {static_cast<std::uint64_t>(epoch)}), Stream::Shuffle);
      shuffle(order_.begin(), order_.end(), rng);
    }
  }

  const std::vector<std::size_t>& order() const { return order_; }

  Batch batch(std::size_t step) const {
    if (step >= steps()) throw ParameterError("batch step " + std::to_string(step) + " out of range");
    const std::size_t begin = step * options_.batch_size;
    const std::size_t end = std::min(order_.size(), begin + options_.batch_size);
    Batch b;
    b.row_ids.assign(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(end));
    const std::size_t n = end - begin;
    b.targets = Tensor<float>({n, 1});
    std::size_t per_sample = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = b.row_ids[i];
      Tensor<float> img = loader_(row);
      if (options_.augment && options_.augment->enabled) {
        Rng rng(mix_seed(options_.seed, {static_cast<std::uint64_t>(epoch_), row}), Stream::Augment);
        img = augment(img, *options_.augment, rng);
      }
      if (i == 0) {
        Shape shape{n};
        shape.insert(shape.end(), img.shape().begin(), img.shape().end());
        b.inputs = Tensor<float>(shape);
        per_sample = img.size();
      } else if (img.size() != per_sample) {
        throw DimensionError("image for row " + std::to_string(row) + " has shape " + shape_string(img.shape()));
      }
      std::copy(img.data().begin(), img.data().end(), b.inputs.data().begin() + static_cast<std::ptrdiff_t>(i * per_sample));
      b.targets[i] = static_cast<float>(class_index(rows_->at(row).gender));
    }
    return b;
  }

private:
  const std::vector<IndexRow>* rows_;
  std::vector<std::size_t> members_;
  ImageLoader loader_;
  BatchOptions options_;
  int epoch_ = 0;
  std::vector<std::size_t> order_;
};

// Every batch of one epoch, materialised.
inline std::vector<Batch> batches(const std::vector<IndexRow>& rows, std::vector<std::size_t> members,
                                  ImageLoader loader, const BatchOptions& options, int epoch) {
  BatchStream stream(rows, std::move(members), std::move(loader), options);
  stream.set_epoch(epoch);
  std::vector<Batch> out;
  for (std::size_t s = 0; s < stream.steps(); ++s) out.push_back(stream.batch(s));
  return out;
}

}  // namespace agbada::data
