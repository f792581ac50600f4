#pragma once

// Independent reference implementations used only by tests. Nothing here may
// call into the kernels it is checking.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "agbada/layers.hpp"
#include "agbada/model.hpp"
#include "agbada/rng.hpp"
#include "agbada/tensor.hpp"

namespace oracle {

using agbada::Shape;
using agbada::Tensor;

// Textbook triple loop; the accumulator is a scalar summed in ascending t.
template <typename T>
Tensor<T> naive_matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T sum{0};
      for (std::size_t t = 0; t < k; ++t) sum += a[i * k + t] * b[t * n + j];
      c[i * n + j] = sum;
    }
  return c;
}

// Direct nested-loop cross-correlation with zero padding, accumulated in double.
template <typename T>
Tensor<T> direct_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const agbada::Window& win,
                      bool relu = false) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0);
  const std::size_t ho = (h + 2 * win.ph - win.kh) / win.sh + 1;
  const std::size_t wo = (wd + 2 * win.pw - win.kw) / win.sw + 1;
  Tensor<T> y({n, cout, ho, wo});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = b[o];
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t i = 0; i < win.kh; ++i)
              for (std::size_t j = 0; j < win.kw; ++j) {
                const long iy = static_cast<long>(oy * win.sh + i) - static_cast<long>(win.ph);
                const long ix = static_cast<long>(ox * win.sw + j) - static_cast<long>(win.pw);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += static_cast<double>(x.at({s, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)})) *
                       static_cast<double>(w.at({o, c, i, j}));
              }
          if (relu && acc < 0) acc = 0;
          y.at({s, o, oy, ox}) = static_cast<T>(acc);
        }
  return y;
}

// Column j of im2col holds the receptive field of output position j.
template <typename T>
T patch_value(const Tensor<T>& x, const agbada::Window& win, std::size_t row, std::size_t col) {
  const std::size_t h = x.dim(1), w = x.dim(2);
  const std::size_t wo = (w + 2 * win.pw - win.kw) / win.sw + 1;
  const std::size_t c = row / (win.kh * win.kw), i = (row / win.kw) % win.kh, j = row % win.kw;
  const std::size_t oy = col / wo, ox = col % wo;
  const long iy = static_cast<long>(oy * win.sh + i) - static_cast<long>(win.ph);
  const long ix = static_cast<long>(ox * win.sw + j) - static_cast<long>(win.pw);
  if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) return T{0};
  return x.at({c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)});
}

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  agbada::Rng rng(seed, 99);
  return agbada::fill_random<T>(shape, agbada::Uniform{lo, hi}, rng);
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// ||a - b|| / max(||a||, ||b||, tiny)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / scale;
}

template <typename T>
std::vector<double> as_vector(const Tensor<T>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

// Central differences of a scalar function with respect to every entry of `x`.
inline std::vector<double> numeric_gradient(Tensor<double>& x, const std::function<double()>& loss, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Gradient check of one layer against central differences of the scalar
// L = sum(r * forward(x)) for a fixed random projection r. Stochastic layers
// see the same generator state on every evaluation.
struct GradientErrors {
  double dx = 0.0;
  double dW = 0.0;
  double db = 0.0;
};

inline GradientErrors check_layer_gradients(agbada::LayerNode<double>& layer, Tensor<double> x, std::uint64_t seed,
                                            double h = 1e-5) {
  auto run = [&](const Tensor<double>& in, bool cache) {
    agbada::Rng rng(seed, agbada::Stream::Dropout);
    return agbada::layer_forward(layer, in, agbada::Mode::Train, &rng, cache);
  };
  const auto y = run(x, true);
  const auto r = random_tensor<double>(y.shape(), seed ^ 0x5eedULL);
  const auto dx = agbada::layer_backward(layer, r, true);
  GradientErrors out;
  auto loss = [&]() { return dot(run(x, false), r); };
  out.dx = relative_error(as_vector(dx), numeric_gradient(x, loss, h));
  if (layer.has_params()) {
    const auto dW = as_vector(layer.grads.at("W"));
    const auto db = as_vector(layer.grads.at("b"));
    out.dW = relative_error(dW, numeric_gradient(layer.params.at("W"), loss, h));
    out.db = relative_error(db, numeric_gradient(layer.params.at("b"), loss, h));
  }
  return out;
}

// Relative error of every parameter gradient of a whole model, flattened
// together, for L = sum(r * forward(x)).
inline double check_model_gradients(agbada::SequentialModel<double>& model, const Tensor<double>& x,
                                    std::uint64_t seed, double h = 1e-5) {
  agbada::Rng rng(seed, agbada::Stream::Dropout);
  const auto y = agbada::forward(model, x, agbada::Mode::Train, &rng);
  const auto r = random_tensor<double>(y.shape(), seed ^ 0x5eedULL);
  agbada::backward(model, r);
  auto loss = [&]() {
    agbada::Rng again(seed, agbada::Stream::Dropout);
    return dot(agbada::forward(model, x, agbada::Mode::Train, &again), r);
  };
  std::vector<double> analytic, numeric;
  for (auto& layer : model.layers) {
    if (!layer.trainable) continue;
    for (auto& [name, p] : layer.params) {
      const auto g = as_vector(layer.grads.at(name));
      const auto n = numeric_gradient(p, loss, h);
      analytic.insert(analytic.end(), g.begin(), g.end());
      numeric.insert(numeric.end(), n.begin(), n.end());
    }
  }
  return relative_error(analytic, numeric);
}

// Bilinear sample at continuous (y, x) of one plane, edge-clamped.
inline double bilinear_at(const std::vector<std::vector<double>>& plane, double y, double x) {
  const double maxy = static_cast<double>(plane.size() - 1), maxx = static_cast<double>(plane[0].size() - 1);
  y = std::min(std::max(y, 0.0), maxy);
  x = std::min(std::max(x, 0.0), maxx);
  const auto y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min<std::size_t>(y0 + 1, plane.size() - 1), x1 = std::min<std::size_t>(x0 + 1, plane[0].size() - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  return plane[y0][x0] * (1 - fy) * (1 - fx) + plane[y0][x1] * (1 - fy) * fx + plane[y1][x0] * fy * (1 - fx) +
         plane[y1][x1] * fy * fx;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("agbada_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
