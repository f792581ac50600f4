#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "agbada/errors.hpp"
#include "agbada/model.hpp"
#include "agbada/tensor.hpp"

namespace agbada {

// Binary weight container, all integers little-endian:
//
//   "VGW1" | u32 version | u32 entry count
//   entry: u32 name length | name bytes (UTF-8) | u32 dtype (1 = f32) | u32 rank
//          | rank x u64 dims | f32 values
//   trailer: u32 CRC-32 of every preceding byte
inline constexpr char kWeightMagic[4] = {'V', 'G', 'W', '1'};
inline constexpr std::uint32_t kWeightVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 1;

class WeightFileError : public IoError {
public:
  enum class Code { BadMagic, CrcMismatch, Truncated, ShapeConflict, UnknownEntry, MissingEntry, Unsupported, Io };

  WeightFileError(Code code, const std::string& what) : IoError(what), code_(code) {}
  Code code() const noexcept { return code_; }

private:
  Code code_;
};

struct WeightEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

namespace detail {

class ByteWriter {
public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }

  std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (n > size_ - pos_) {
      throw WeightFileError(WeightFileError::Code::Truncated,
                            "weight file truncated at byte " + std::to_string(pos_));
    }
  }
  std::size_t remaining() const { return size_ - pos_; }

private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_weights(const std::vector<WeightEntry>& entries) {
  detail::ByteWriter w;
  w.raw(kWeightMagic, 4);
  w.u32(kWeightVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (shape_volume(e.shape) != e.values.size()) {
      throw DimensionError("weight entry '" + e.name + "' has " + std::to_string(e.values.size()) +
                           " values for shape " + shape_string(e.shape));
    }
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.u32(kDtypeF32);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.u64(d);
    for (float v : e.values) w.f32(v);
  }
  w.u32(detail::crc32_of(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

inline std::vector<WeightEntry> decode_weights(const std::vector<std::uint8_t>& bytes) {
  using Code = WeightFileError::Code;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kWeightMagic, 4) != 0) {
    throw WeightFileError(Code::BadMagic, "bad magic: not a VGW1 weight file");
  }
  if (bytes.size() < 16) throw WeightFileError(Code::Truncated, "weight file truncated (header)");
  const std::size_t body = bytes.size() - 4;
  detail::ByteReader trailer(bytes.data() + body, 4);
  const std::uint32_t stored = trailer.u32();
  const std::uint32_t actual = detail::crc32_of(bytes.data(), body);
  if (stored != actual) {
    throw WeightFileError(Code::CrcMismatch, "CRC mismatch: stored " + std::to_string(stored) + ", computed " +
                                                 std::to_string(actual));
  }

  detail::ByteReader r(bytes.data() + 4, body - 4);
  const std::uint32_t version = r.u32();
  if (version != kWeightVersion) {
    throw WeightFileError(Code::Unsupported, "unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<WeightEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightEntry e;
    e.name = r.str(r.u32());
    const std::uint32_t dtype = r.u32();
    if (dtype != kDtypeF32) {
      throw WeightFileError(Code::Unsupported, "entry '" + e.name + "' has unsupported dtype " + std::to_string(dtype));
    }
    const std::uint32_t rank = r.u32();
    r.need(static_cast<std::size_t>(rank) * 8);
    std::size_t volume = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = r.u64();
      if (dim == 0) throw WeightFileError(Code::ShapeConflict, "entry '" + e.name + "' has a zero dimension");
      if (dim > r.remaining()) {
        throw WeightFileError(Code::Truncated, "entry '" + e.name + "' declares more values than the file holds");
      }
      e.shape.push_back(static_cast<std::size_t>(dim));
      volume *= static_cast<std::size_t>(dim);
      if (volume > r.remaining() / 4) {
        throw WeightFileError(Code::Truncated, "entry '" + e.name + "' declares more values than the file holds");
      }
    }
    r.need(volume * 4);
    e.values.resize(volume);
    for (auto& v : e.values) v = r.f32();
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) {
    throw WeightFileError(Code::Truncated, "weight file has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return entries;
}

inline void write_weight_file(const std::string& path, const std::vector<WeightEntry>& entries) {
  const auto bytes = encode_weights(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightFileError(WeightFileError::Code::Io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WeightFileError(WeightFileError::Code::Io, "failed writing '" + path + "'");
}

inline std::vector<WeightEntry> read_weight_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFileError(WeightFileError::Code::Io, "cannot open weight file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

template <typename T>
std::vector<WeightEntry> weight_entries(const SequentialModel<T>& model) {
  std::vector<WeightEntry> entries;
  for (const auto& l : model.layers) {
    for (const auto& [pname, p] : l.params) {
      WeightEntry e;
      e.name = l.name + "/" + pname;
      e.shape = p.shape();
      e.values.assign(p.data().begin(), p.data().end());
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

template <typename T>
void save_weights(const SequentialModel<T>& model, const std::string& path) {
  write_weight_file(path, weight_entries(model));
}

// Applies decoded entries to the model. Strict mode requires an exact name
// match in both directions; non-strict skips entries with no matching layer
// and leaves unmatched parameters untouched. Shape conflicts always fail.
template <typename T>
void apply_weights(SequentialModel<T>& model, const std::vector<WeightEntry>& entries, bool strict) {
  using Code = WeightFileError::Code;
  std::map<std::string, Tensor<T>*> targets;
  for (auto& l : model.layers)
    for (auto& [pname, p] : l.params) targets[l.name + "/" + pname] = &p;

  std::map<std::string, const WeightEntry*> matched;
  for (const auto& e : entries) {
    auto it = targets.find(e.name);
    if (it == targets.end()) {
      if (strict) throw WeightFileError(Code::UnknownEntry, "weight entry '" + e.name + "' matches no parameter");
      continue;
    }
    if (it->second->shape() != e.shape) {
      throw WeightFileError(Code::ShapeConflict, "shape conflict for '" + e.name + "': file " +
                                                     shape_string(e.shape) + ", model " +
                                                     shape_string(it->second->shape()));
    }
    matched[e.name] = &e;
  }
  if (strict && matched.size() != targets.size()) {
    for (const auto& [name, _] : targets)
      if (!matched.count(name)) throw WeightFileError(Code::MissingEntry, "weight file lacks '" + name + "'");
  }
  for (const auto& [name, e] : matched) {
    auto values = targets[name]->data();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<T>(e->values[i]);
  }
}

template <typename T>
void load_weights(SequentialModel<T>& model, const std::string& path, bool strict = true) {
  apply_weights(model, read_weight_file(path), strict);
}

}  // namespace agbada
