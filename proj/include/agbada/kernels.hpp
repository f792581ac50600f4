#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>

#include "agbada/errors.hpp"
#include "agbada/tensor.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace agbada {

// Every kernel below computes each output element with a fixed, ascending
// accumulation order. Threads only split the set of output elements, so the
// result is bitwise identical for any thread count.

namespace detail {

inline constexpr std::size_t kColumnBlock = 256;
inline constexpr std::size_t kParallelWork = 1u << 15;

}  // namespace detail

inline void set_thread_count(int threads) {
#if defined(_OPENMP)
  if (threads >= 1) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

// c[m,n] = a[m,k] * b[k,n]
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t blocks = (n + detail::kColumnBlock - 1) / detail::kColumnBlock;
  const bool parallel = m * n * k >= detail::kParallelWork;
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t jb = 0; jb < blocks; ++jb) {
      const std::size_t j0 = jb * detail::kColumnBlock;
      const std::size_t j1 = std::min(n, j0 + detail::kColumnBlock);
      T* crow = c + i * n;
      for (std::size_t j = j0; j < j1; ++j) crow[j] = T{0};
      for (std::size_t t = 0; t < k; ++t) {
        const T av = a[i * k + t];
        const T* brow = b + t * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// c[m,n] = a[k,m]^T * b[k,n]
template <typename T>
void gemm_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t blocks = (n + detail::kColumnBlock - 1) / detail::kColumnBlock;
  const bool parallel = m * n * k >= detail::kParallelWork;
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t jb = 0; jb < blocks; ++jb) {
      const std::size_t j0 = jb * detail::kColumnBlock;
      const std::size_t j1 = std::min(n, j0 + detail::kColumnBlock);
      T* crow = c + i * n;
      for (std::size_t j = j0; j < j1; ++j) crow[j] = T{0};
      for (std::size_t t = 0; t < k; ++t) {
        const T av = a[t * m + i];
        const T* brow = b + t * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// c[m,n] = a[m,k] * b[n,k]^T
template <typename T>
void gemm_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const bool parallel = m * n * k >= detail::kParallelWork;
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const T* arow = a + i * k;
      const T* brow = b + j * k;
      T acc{0};
      for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  gemm(a.data().data(), b.data().data(), c.data().data(), m, k, n);
  return c;
}

struct Window {
  std::size_t kh = 1, kw = 1;
  std::size_t sh = 1, sw = 1;
  std::size_t ph = 0, pw = 0;

  std::size_t out_h(std::size_t h) const { return out_extent(h, kh, sh, ph); }
  std::size_t out_w(std::size_t w) const { return out_extent(w, kw, sw, pw); }

  void check(std::size_t h, std::size_t w) const {
    if (kh == 0 || kw == 0 || sh == 0 || sw == 0) throw DimensionError("kernel and stride must be >= 1");
    if (h + 2 * ph < kh || w + 2 * pw < kw) {
      throw DimensionError("kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                           " larger than padded input " + std::to_string(h + 2 * ph) + "x" +
                           std::to_string(w + 2 * pw));
    }
  }

private:
  static std::size_t out_extent(std::size_t x, std::size_t k, std::size_t s, std::size_t p) {
    return (x + 2 * p - k) / s + 1;
  }
};

// x[C,H,W] -> cols[C*kh*kw, Ho*Wo]; rows enumerate (c, i, j) row-major.
template <typename T>
void im2col(const T* x, std::size_t channels, std::size_t h, std::size_t w, const Window& win, T* cols) {
  const std::size_t ho = win.out_h(h), wo = win.out_w(w);
  const std::size_t rows = channels * win.kh * win.kw;
  const std::size_t positions = ho * wo;
#pragma omp parallel for schedule(static) if (rows * positions >= detail::kParallelWork)
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = r / (win.kh * win.kw);
    const std::size_t ki = (r / win.kw) % win.kh;
    const std::size_t kj = r % win.kw;
    T* out = cols + r * positions;
    const T* plane = x + c * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * win.sh + ki) - static_cast<std::ptrdiff_t>(win.ph);
      T* dst = out + oy * wo;
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
        std::fill(dst, dst + wo, T{0});
        continue;
      }
      const T* src = plane + static_cast<std::size_t>(iy) * w;
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * win.sw + kj) - static_cast<std::ptrdiff_t>(win.pw);
        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? T{0} : src[ix];
      }
    }
  }
}

// Scatter-add adjoint of im2col: cols[C*kh*kw, Ho*Wo] -> x[C,H,W] (overwritten).
template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t h, std::size_t w, const Window& win, T* x) {
  const std::size_t ho = win.out_h(h), wo = win.out_w(w);
  const std::size_t positions = ho * wo;
  // Parallel over channels: each channel plane only receives from its own rows.
#pragma omp parallel for schedule(static) if (channels * win.kh * win.kw * positions >= detail::kParallelWork)
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = x + c * h * w;
    std::fill(plane, plane + h * w, T{0});
    for (std::size_t ki = 0; ki < win.kh; ++ki) {
      for (std::size_t kj = 0; kj < win.kw; ++kj) {
        const T* src = cols + ((c * win.kh + ki) * win.kw + kj) * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * win.sh + ki) - static_cast<std::ptrdiff_t>(win.ph);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * win.sw + kj) - static_cast<std::ptrdiff_t>(win.pw);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> im2col(const Tensor<T>& x, const Window& win) {
  if (x.rank() != 3) throw DimensionError("im2col expects (C,H,W), got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  win.check(h, w);
  Tensor<T> cols({c * win.kh * win.kw, win.out_h(h) * win.out_w(w)});
  im2col(x.data().data(), c, h, w, win, cols.data().data());
  return cols;
}

template <typename T>
Tensor<T> col2im(const Tensor<T>& cols, const Shape& image_shape, const Window& win) {
  if (image_shape.size() != 3) throw DimensionError("col2im expects a (C,H,W) target shape");
  const std::size_t c = image_shape[0], h = image_shape[1], w = image_shape[2];
  win.check(h, w);
  const Shape expected{c * win.kh * win.kw, win.out_h(h) * win.out_w(w)};
  if (cols.shape() != expected) {
    throw DimensionError("col2im got " + shape_string(cols.shape()) + ", expected " + shape_string(expected));
  }
  Tensor<T> x(image_shape);
  col2im(cols.data().data(), c, h, w, win, x.data().data());
  return x;
}

enum class Reduction { Sum, Mean, ArgMax };

// Reduces along `axis`; the result drops that axis (a rank-1 input yields shape (1)).
template <typename T>
Tensor<T> reduce(const Tensor<T>& x, Reduction kind, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("reduce axis " + std::to_string(axis) + " invalid for shape " + shape_string(x.shape()));
  }
  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t len = shape[axis];

  Shape out_shape;
  for (std::size_t d = 0; d < shape.size(); ++d)
    if (d != axis) out_shape.push_back(shape[d]);
  if (out_shape.empty()) out_shape.push_back(1);

  Tensor<T> out(out_shape);
  const auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      T result{0};
      if (kind == Reduction::ArgMax) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < len; ++t)
          if (in[base + t * inner] > in[base + best * inner]) best = t;
        result = static_cast<T>(best);
      } else {
        for (std::size_t t = 0; t < len; ++t) result += in[base + t * inner];
        if (kind == Reduction::Mean) result /= static_cast<T>(len);
      }
      out[o * inner + i] = result;
    }
  }
  return out;
}

}  // namespace agbada
