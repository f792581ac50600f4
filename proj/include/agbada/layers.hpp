#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "agbada/errors.hpp"
#include "agbada/kernels.hpp"
#include "agbada/rng.hpp"
#include "agbada/tensor.hpp"

namespace agbada {

enum class LayerKind { Conv2D, MaxPool2D, Flatten, Dense, Dropout, ReLU, Sigmoid, Softmax };

enum class Mode { Train, Infer };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Sigmoid: return "Sigmoid";
    case LayerKind::Softmax: return "Softmax";
  }
  return "?";
}

struct ConvConfig {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  Window window{3, 3, 1, 1, 1, 1};
  bool relu = false;  // fused activation
};

struct PoolConfig {
  std::size_t size = 2;
  std::size_t stride = 2;
};

struct DenseConfig {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

struct DropoutConfig {
  double rate = 0.5;
};

using LayerConfig = std::variant<std::monostate, ConvConfig, PoolConfig, DenseConfig, DropoutConfig>;

// Forward-pass intermediates consumed by backward.
template <typename T>
struct LayerCache {
  Tensor<T> input;
  Tensor<T> output;
  Tensor<T> mask;
  std::vector<std::size_t> argmax;
  Shape input_shape;
  bool valid = false;

  void clear() { *this = LayerCache{}; }
};

template <typename T>
struct LayerNode {
  std::string name;
  LayerKind kind = LayerKind::Flatten;
  std::map<std::string, Tensor<T>> params;
  std::map<std::string, Tensor<T>> grads;
  bool trainable = true;
  LayerConfig config;
  LayerCache<T> cache;

  template <typename C>
  const C& cfg() const {
    return std::get<C>(config);
  }

  bool has_params() const { return !params.empty(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params) n += p.size();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Construction

inline void validate_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

// 'Same'-padded square convolution (padding = kernel/2, stride 1).
template <typename T>
LayerNode<T> make_conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
                         std::size_t kernel = 3, bool relu = true) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0) throw ParameterError("conv sizes must be >= 1");
  LayerNode<T> layer;
  layer.name = std::move(name);
  layer.kind = LayerKind::Conv2D;
  layer.config = ConvConfig{in_channels, out_channels, Window{kernel, kernel, 1, 1, kernel / 2, kernel / 2}, relu};
  layer.params["W"] = Tensor<T>({out_channels, in_channels, kernel, kernel});
  layer.params["b"] = Tensor<T>({out_channels});
  return layer;
}

template <typename T>
LayerNode<T> make_conv2d(std::string name, const ConvConfig& cfg) {
  LayerNode<T> layer;
  layer.name = std::move(name);
  layer.kind = LayerKind::Conv2D;
  layer.config = cfg;
  layer.params["W"] = Tensor<T>({cfg.out_channels, cfg.in_channels, cfg.window.kh, cfg.window.kw});
  layer.params["b"] = Tensor<T>({cfg.out_channels});
  return layer;
}

template <typename T>
LayerNode<T> make_maxpool(std::string name, std::size_t size = 2, std::size_t stride = 2) {
  LayerNode<T> layer;
  layer.name = std::move(name);
  layer.kind = LayerKind::MaxPool2D;
  layer.config = PoolConfig{size, stride};
  return layer;
}

template <typename T>
LayerNode<T> make_flatten(std::string name) {
  LayerNode<T> layer;
  layer.name = std::move(name);
  layer.kind = LayerKind::Flatten;
  return layer;
}

template <typename T>
LayerNode<T> make_dense(std::string name, std::size_t in_features, std::size_t out_features) {
  if (in_features == 0 || out_features == 0) throw ParameterError("dense sizes must be >= 1");
  LayerNode<T> layer;
  layer.name = std::move(name);
  layer.kind = LayerKind::Dense;
  layer.config = DenseConfig{in_features, out_features};
  layer.params["W"] = Tensor<T>({out_features, in_features});
  layer.params["b"] = Tensor<T>({out_features});
  return layer;
}

template <typename T>
LayerNode<T> make_dropout(std::string name, double rate) {
  validate_dropout_rate(rate);
  LayerNode<T> layer;
  layer.name = std::move(name);
  layer.kind = LayerKind::Dropout;
  layer.config = DropoutConfig{rate};
  return layer;
}

template <typename T>
LayerNode<T> make_activation(std::string name, LayerKind kind) {
  if (kind != LayerKind::ReLU && kind != LayerKind::Sigmoid && kind != LayerKind::Softmax) {
    throw ParameterError(std::string("not an activation kind: ") + to_string(kind));
  }
  LayerNode<T> layer;
  layer.name = std::move(name);
  layer.kind = kind;
  return layer;
}

// ---------------------------------------------------------------------------
// Shape inference on per-sample shapes (batch axis excluded).

inline Shape pool_output_shape(const Shape& in, const PoolConfig& cfg) {
  if (in.size() != 3) throw DimensionError("maxpool expects (C,H,W), got " + shape_string(in));
  if (in[1] < cfg.size || in[2] < cfg.size) {
    throw DimensionError("maxpool needs H,W >= " + std::to_string(cfg.size) + ", got " + shape_string(in));
  }
  return {in[0], (in[1] - cfg.size) / cfg.stride + 1, (in[2] - cfg.size) / cfg.stride + 1};
}

template <typename T>
Shape output_shape(const LayerNode<T>& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::Conv2D: {
      const auto& cfg = layer.template cfg<ConvConfig>();
      if (in.size() != 3 || in[0] != cfg.in_channels) {
        throw DimensionError("conv expects (" + std::to_string(cfg.in_channels) + ",H,W), got " + shape_string(in));
      }
      cfg.window.check(in[1], in[2]);
      return {cfg.out_channels, cfg.window.out_h(in[1]), cfg.window.out_w(in[2])};
    }
    case LayerKind::MaxPool2D:
      return pool_output_shape(in, layer.template cfg<PoolConfig>());
    case LayerKind::Flatten:
      return {shape_volume(in)};
    case LayerKind::Dense: {
      const auto& cfg = layer.template cfg<DenseConfig>();
      if (in.size() != 1 || in[0] != cfg.in_features) {
        throw DimensionError("dense expects (" + std::to_string(cfg.in_features) + "), got " + shape_string(in));
      }
      return {cfg.out_features};
    }
    default:
      return in;
  }
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
T sigmoid(T x) {
  // Kept strictly inside (0, 1) so log(p) and log(1-p) stay finite.
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T{1} - std::numeric_limits<T>::epsilon() / T{2};
  T p;
  if (x >= T{0}) {
    p = T{1} / (T{1} + std::exp(-x));
  } else {
    const T e = std::exp(x);
    p = e / (T{1} + e);
  }
  return std::clamp(p, lo, hi);
}

// Pure forward evaluation of an activation; softmax normalises the last axis.
template <typename T>
Tensor<T> activate(LayerKind kind, const Tensor<T>& x) {
  Tensor<T> y = x;
  auto v = y.data();
  switch (kind) {
    case LayerKind::ReLU:
      for (auto& e : v) e = e > T{0} ? e : T{0};
      break;
    case LayerKind::Sigmoid:
      for (auto& e : v) e = sigmoid(e);
      break;
    case LayerKind::Softmax: {
      const std::size_t cols = x.shape().back();
      const std::size_t rows = x.size() / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        T* row = v.data() + r * cols;
        const T mx = *std::max_element(row, row + cols);
        T sum{0};
        for (std::size_t j = 0; j < cols; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
      }
      break;
    }
    default:
      throw ParameterError(std::string("not an activation kind: ") + to_string(kind));
  }
  return y;
}

// Backward of an activation given its cached forward output.
template <typename T>
Tensor<T> activate_backward(LayerKind kind, const Tensor<T>& output, const Tensor<T>& dy) {
  if (output.shape() != dy.shape()) {
    throw DimensionError("activation backward: dy " + shape_string(dy.shape()) + " vs output " +
                         shape_string(output.shape()));
  }
  Tensor<T> dx(dy.shape());
  const auto y = output.data();
  const auto g = dy.data();
  auto d = dx.data();
  switch (kind) {
    case LayerKind::ReLU:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = y[i] > T{0} ? g[i] : T{0};
      break;
    case LayerKind::Sigmoid:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * y[i] * (T{1} - y[i]);
      break;
    case LayerKind::Softmax: {
      const std::size_t cols = dy.shape().back();
      const std::size_t rows = dy.size() / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        T dot{0};
        for (std::size_t j = 0; j < cols; ++j) dot += y[o + j] * g[o + j];
        for (std::size_t j = 0; j < cols; ++j) d[o + j] = y[o + j] * (g[o + j] - dot);
      }
      break;
    }
    default:
      throw ParameterError(std::string("not an activation kind: ") + to_string(kind));
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Forward / backward per kind

namespace detail {

template <typename T>
void require_cache(const LayerNode<T>& layer) {
  if (!layer.cache.valid) throw StateError("backward called before forward on layer '" + layer.name + "'");
}

template <typename T>
void require_rank4(const LayerNode<T>& layer, const Tensor<T>& x) {
  if (x.rank() != 4) {
    throw DimensionError("layer '" + layer.name + "' expects (N,C,H,W), got " + shape_string(x.shape()));
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(LayerNode<T>& layer, const Tensor<T>& x, bool keep_cache = true) {
  const auto& cfg = layer.template cfg<ConvConfig>();
  detail::require_rank4(layer, x);
  if (x.dim(1) != cfg.in_channels) {
    throw DimensionError("layer '" + layer.name + "' expects " + std::to_string(cfg.in_channels) +
                         " input channels, got " + shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  cfg.window.check(h, w);
  const std::size_t ho = cfg.window.out_h(h), wo = cfg.window.out_w(w);
  const std::size_t k = cfg.in_channels * cfg.window.kh * cfg.window.kw;
  const std::size_t positions = ho * wo;
  const std::size_t cout = cfg.out_channels;

  const auto& weight = layer.params.at("W");
  const auto& bias = layer.params.at("b");
  Tensor<T> y({n, cout, ho, wo});
  std::vector<T> cols(k * positions);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.data().data() + s * cfg.in_channels * h * w, cfg.in_channels, h, w, cfg.window, cols.data());
    T* out = y.data().data() + s * cout * positions;
    gemm(weight.data().data(), cols.data(), out, cout, k, positions);
    for (std::size_t o = 0; o < cout; ++o) {
      const T b = bias[o];
      T* row = out + o * positions;
      for (std::size_t p = 0; p < positions; ++p) {
        row[p] += b;
        if (cfg.relu && !(row[p] > T{0})) row[p] = T{0};
      }
    }
  }
  if (keep_cache) {
    layer.cache.input = x;
    if (cfg.relu) layer.cache.output = y;
    layer.cache.valid = true;
  } else {
    layer.cache.clear();
  }
  return y;
}

// Fills grads["W"], grads["b"] when the layer is trainable; returns dx when requested.
template <typename T>
Tensor<T> conv2d_backward(LayerNode<T>& layer, const Tensor<T>& dy, bool need_dx = true) {
  detail::require_cache(layer);
  const auto& cfg = layer.template cfg<ConvConfig>();
  const Tensor<T>& x = layer.cache.input;
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = cfg.window.out_h(h), wo = cfg.window.out_w(w);
  const std::size_t cout = cfg.out_channels;
  const std::size_t k = cfg.in_channels * cfg.window.kh * cfg.window.kw;
  const std::size_t positions = ho * wo;
  if (dy.shape() != Shape{n, cout, ho, wo}) {
    throw DimensionError("layer '" + layer.name + "' backward got dy " + shape_string(dy.shape()));
  }

  Tensor<T> dz = dy;
  if (cfg.relu) {
    const auto y = layer.cache.output.data();
    auto g = dz.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(y[i] > T{0})) g[i] = T{0};
  }

  const bool param_grads = layer.trainable;
  layer.grads.clear();
  Tensor<T> dweight, dbias;
  std::vector<T> partial;
  if (param_grads) {
    dweight = Tensor<T>(layer.params.at("W").shape());
    dbias = Tensor<T>({cout});
    partial.resize(cout * k);
  }
  Tensor<T> dx;
  std::vector<T> dcols;
  if (need_dx) {
    dx = Tensor<T>(x.shape());
    dcols.resize(k * positions);
  }
  std::vector<T> cols(param_grads ? k * positions : 0);
  const T* weight = layer.params.at("W").data().data();

  for (std::size_t s = 0; s < n; ++s) {
    const T* g = dz.data().data() + s * cout * positions;
    if (param_grads) {
      im2col(x.data().data() + s * cfg.in_channels * h * w, cfg.in_channels, h, w, cfg.window, cols.data());
      gemm_bt(g, cols.data(), partial.data(), cout, positions, k);
      auto dw = dweight.data();
      for (std::size_t i = 0; i < partial.size(); ++i) dw[i] += partial[i];
      for (std::size_t o = 0; o < cout; ++o) {
        T acc{0};
        for (std::size_t p = 0; p < positions; ++p) acc += g[o * positions + p];
        dbias[o] += acc;
      }
    }
    if (need_dx) {
      gemm_at(weight, g, dcols.data(), k, cout, positions);
      col2im(dcols.data(), cfg.in_channels, h, w, cfg.window, dx.data().data() + s * cfg.in_channels * h * w);
    }
  }
  if (param_grads) {
    layer.grads["W"] = std::move(dweight);
    layer.grads["b"] = std::move(dbias);
  }
  return dx;
}

template <typename T>
Tensor<T> maxpool_forward(LayerNode<T>& layer, const Tensor<T>& x, bool keep_cache = true) {
  const auto& cfg = layer.template cfg<PoolConfig>();
  detail::require_rank4(layer, x);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Shape per = pool_output_shape({c, h, w}, cfg);
  const std::size_t ho = per[1], wo = per[2];
  Tensor<T> y({n, c, ho, wo});
  std::vector<std::size_t> argmax(y.size());
  const auto in = x.data();
  auto out = y.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = base + (oy * cfg.stride) * w + ox * cfg.stride;
        for (std::size_t i = 0; i < cfg.size; ++i) {
          for (std::size_t j = 0; j < cfg.size; ++j) {
            const std::size_t idx = base + (oy * cfg.stride + i) * w + ox * cfg.stride + j;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (plane * ho + oy) * wo + ox;
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  if (keep_cache) {
    layer.cache.argmax = std::move(argmax);
    layer.cache.input_shape = x.shape();
    layer.cache.valid = true;
  } else {
    layer.cache.clear();
  }
  return y;
}

template <typename T>
Tensor<T> maxpool_backward(LayerNode<T>& layer, const Tensor<T>& dy) {
  detail::require_cache(layer);
  if (dy.size() != layer.cache.argmax.size()) {
    throw DimensionError("layer '" + layer.name + "' backward got dy " + shape_string(dy.shape()));
  }
  Tensor<T> dx(layer.cache.input_shape);
  const auto g = dy.data();
  for (std::size_t o = 0; o < g.size(); ++o) dx[layer.cache.argmax[o]] += g[o];
  return dx;
}

template <typename T>
Tensor<T> flatten_forward(LayerNode<T>& layer, const Tensor<T>& x, bool keep_cache = true) {
  if (x.rank() < 2) throw DimensionError("layer '" + layer.name + "' expects a batch axis");
  if (keep_cache) {
    layer.cache.input_shape = x.shape();
    layer.cache.valid = true;
  }
  const std::size_t n = x.dim(0);
  return x.reshaped({n, x.size() / n});
}

template <typename T>
Tensor<T> flatten_backward(LayerNode<T>& layer, const Tensor<T>& dy) {
  detail::require_cache(layer);
  return dy.reshaped(layer.cache.input_shape);
}

template <typename T>
Tensor<T> dense_forward(LayerNode<T>& layer, const Tensor<T>& x, bool keep_cache = true) {
  const auto& cfg = layer.template cfg<DenseConfig>();
  if (x.rank() != 2 || x.dim(1) != cfg.in_features) {
    throw DimensionError("layer '" + layer.name + "' expects (N," + std::to_string(cfg.in_features) +
                         "), got " + shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0);
  Tensor<T> y({n, cfg.out_features});
  gemm_bt(x.data().data(), layer.params.at("W").data().data(), y.data().data(), n, cfg.in_features,
          cfg.out_features);
  const auto& b = layer.params.at("b");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < cfg.out_features; ++o) y[i * cfg.out_features + o] += b[o];
  if (keep_cache) {
    layer.cache.input = x;
    layer.cache.valid = true;
  } else {
    layer.cache.clear();
  }
  return y;
}

template <typename T>
Tensor<T> dense_backward(LayerNode<T>& layer, const Tensor<T>& dy, bool need_dx = true) {
  detail::require_cache(layer);
  const auto& cfg = layer.template cfg<DenseConfig>();
  const Tensor<T>& x = layer.cache.input;
  const std::size_t n = x.dim(0);
  if (dy.shape() != Shape{n, cfg.out_features}) {
    throw DimensionError("layer '" + layer.name + "' backward got dy " + shape_string(dy.shape()));
  }
  layer.grads.clear();
  if (layer.trainable) {
    Tensor<T> dweight({cfg.out_features, cfg.in_features});
    gemm_at(dy.data().data(), x.data().data(), dweight.data().data(), cfg.out_features, n, cfg.in_features);
    Tensor<T> dbias({cfg.out_features});
    for (std::size_t o = 0; o < cfg.out_features; ++o) {
      T acc{0};
      for (std::size_t i = 0; i < n; ++i) acc += dy[i * cfg.out_features + o];
      dbias[o] = acc;
    }
    layer.grads["W"] = std::move(dweight);
    layer.grads["b"] = std::move(dbias);
  }
  if (!need_dx) return {};
  Tensor<T> dx({n, cfg.in_features});
  gemm(dy.data().data(), layer.params.at("W").data().data(), dx.data().data(), n, cfg.out_features,
       cfg.in_features);
  return dx;
}

template <typename T>
Tensor<T> activation_forward(LayerNode<T>& layer, const Tensor<T>& x, bool keep_cache = true) {
  Tensor<T> y = activate(layer.kind, x);
  if (keep_cache) {
    layer.cache.output = y;
    layer.cache.valid = true;
  } else {
    layer.cache.clear();
  }
  return y;
}

template <typename T>
Tensor<T> activation_backward(LayerNode<T>& layer, const Tensor<T>& dy) {
  detail::require_cache(layer);
  return activate_backward(layer.kind, layer.cache.output, dy);
}

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); infer mode is the identity.
template <typename T>
Tensor<T> dropout_forward(LayerNode<T>& layer, const Tensor<T>& x, Mode mode, Rng* rng, bool keep_cache = true) {
  const double rate = layer.template cfg<DropoutConfig>().rate;
  validate_dropout_rate(rate);
  Tensor<T> mask(x.shape(), T{1});
  if (mode == Mode::Train && rate > 0.0) {
    if (!rng) throw StateError("dropout layer '" + layer.name + "' needs an Rng in train mode");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& m : mask.data()) m = rng->uniform() < rate ? T{0} : keep_scale;
  }
  Tensor<T> y = x;
  auto v = y.data();
  const auto mv = mask.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mv[i];
  if (keep_cache) {
    layer.cache.mask = std::move(mask);
    layer.cache.valid = true;
  } else {
    layer.cache.clear();
  }
  return y;
}

template <typename T>
Tensor<T> dropout_backward(LayerNode<T>& layer, const Tensor<T>& dy) {
  detail::require_cache(layer);
  if (dy.shape() != layer.cache.mask.shape()) {
    throw DimensionError("layer '" + layer.name + "' backward got dy " + shape_string(dy.shape()));
  }
  Tensor<T> dx = dy;
  auto v = dx.data();
  const auto mv = layer.cache.mask.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mv[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Dispatch

template <typename T>
Tensor<T> layer_forward(LayerNode<T>& layer, const Tensor<T>& x, Mode mode, Rng* rng, bool keep_cache) {
  switch (layer.kind) {
    case LayerKind::Conv2D: return conv2d_forward(layer, x, keep_cache);
    case LayerKind::MaxPool2D: return maxpool_forward(layer, x, keep_cache);
    case LayerKind::Flatten: return flatten_forward(layer, x, keep_cache);
    case LayerKind::Dense: return dense_forward(layer, x, keep_cache);
    case LayerKind::Dropout: return dropout_forward(layer, x, mode, rng, keep_cache);
    case LayerKind::ReLU:
    case LayerKind::Sigmoid:
    case LayerKind::Softmax: return activation_forward(layer, x, keep_cache);
  }
  throw StateError("unknown layer kind");
}

template <typename T>
Tensor<T> layer_backward(LayerNode<T>& layer, const Tensor<T>& dy, bool need_dx = true) {
  switch (layer.kind) {
    case LayerKind::Conv2D: return conv2d_backward(layer, dy, need_dx);
    case LayerKind::MaxPool2D: return maxpool_backward(layer, dy);
    case LayerKind::Flatten: return flatten_backward(layer, dy);
    case LayerKind::Dense: return dense_backward(layer, dy, need_dx);
    case LayerKind::Dropout: return dropout_backward(layer, dy);
    case LayerKind::ReLU:
    case LayerKind::Sigmoid:
    case LayerKind::Softmax: return activation_backward(layer, dy);
  }
  throw StateError("unknown layer kind");
}

}  // namespace agbada
