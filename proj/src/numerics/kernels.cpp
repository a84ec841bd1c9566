#include "diffpush/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

#include "diffpush/errors.hpp"

namespace diffpush::numerics::kernels {
namespace {

// acc[j] = fma(a, w[j], acc[j]) for all j.
inline void axpy(double a, const double* __restrict w, double* __restrict acc,
                 std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    acc[j] = std::fma(a, w[j], acc[j]);
  }
}

#if defined(__AVX512F__)
using Vec = __m512d;
constexpr std::size_t kLanes = 8;
inline Vec vload(const double* p) { return _mm512_loadu_pd(p); }
inline void vstore(double* p, Vec v) { _mm512_storeu_pd(p, v); }
inline Vec vbroadcast(double a) { return _mm512_set1_pd(a); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm512_fmadd_pd(a, b, c); }
inline Vec vzero() { return _mm512_setzero_pd(); }
#elif defined(__AVX2__) && defined(__FMA__)
using Vec = __m256d;
constexpr std::size_t kLanes = 4;
inline Vec vload(const double* p) { return _mm256_loadu_pd(p); }
inline void vstore(double* p, Vec v) { _mm256_storeu_pd(p, v); }
inline Vec vbroadcast(double a) { return _mm256_set1_pd(a); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm256_fmadd_pd(a, b, c); }
inline Vec vzero() { return _mm256_setzero_pd(); }
#else
#define DIFFPUSH_SCALAR_KERNELS 1
constexpr std::size_t kLanes = 1;
#endif

#ifndef DIFFPUSH_SCALAR_KERNELS
// Accumulates a kRows x (kVecs * kLanes) output tile in registers over the
// full reduction. Each element sees init followed by fma(in[k], mat[k][j], .)
// for k ascending, the same sequence as the scalar column loop below.
template <std::size_t kRows, std::size_t kVecs>
inline void tile(const double* in, std::size_t inner, const double* mat,
                 std::size_t width, const double* init, double* out,
                 std::size_t r0, std::size_t j0) {
  Vec acc[kRows][kVecs];
  for (std::size_t v = 0; v < kVecs; ++v) {
    const Vec start = init ? vload(init + j0 + v * kLanes) : vzero();
    for (std::size_t i = 0; i < kRows; ++i) {
      acc[i][v] = start;
    }
  }
  for (std::size_t k = 0; k < inner; ++k) {
    const double* w = mat + k * width + j0;
    Vec wv[kVecs];
    for (std::size_t v = 0; v < kVecs; ++v) {
      wv[v] = vload(w + v * kLanes);
    }
    for (std::size_t i = 0; i < kRows; ++i) {
      const Vec a = vbroadcast(in[(r0 + i) * inner + k]);
      for (std::size_t v = 0; v < kVecs; ++v) {
        acc[i][v] = vfma(a, wv[v], acc[i][v]);
      }
    }
  }
  for (std::size_t i = 0; i < kRows; ++i) {
    for (std::size_t v = 0; v < kVecs; ++v) {
      vstore(out + (r0 + i) * width + j0 + v * kLanes, acc[i][v]);
    }
  }
}
#endif

inline void scalar_column(const double* in, std::size_t inner,
                          const double* mat, std::size_t width,
                          const double* init, double* out, std::size_t r,
                          std::size_t j) {
  double acc = init ? init[j] : 0.0;
  for (std::size_t k = 0; k < inner; ++k) {
    acc = std::fma(in[r * inner + k], mat[k * width + j], acc);
  }
  out[r * width + j] = acc;
}

template <std::size_t kRows>
void row_block(const double* in, std::size_t inner, const double* mat,
               std::size_t width, const double* init, double* out,
               std::size_t r0) {
  std::size_t j0 = 0;
#ifndef DIFFPUSH_SCALAR_KERNELS
  constexpr std::size_t kVecs = 4;
  for (; j0 + kVecs * kLanes <= width; j0 += kVecs * kLanes) {
    tile<kRows, kVecs>(in, inner, mat, width, init, out, r0, j0);
  }
  for (; j0 + kLanes <= width; j0 += kLanes) {
    tile<kRows, 1>(in, inner, mat, width, init, out, r0, j0);
  }
#endif
  for (; j0 < width; ++j0) {
    for (std::size_t i = 0; i < kRows; ++i) {
      scalar_column(in, inner, mat, width, init, out, r0 + i, j0);
    }
  }
}

// out[r] = init + sum_k in[r][k] * mat[k]   (mat: [inner x width])
void row_times_matrix(const double* in, std::size_t rows, std::size_t inner,
                      const double* mat, std::size_t width,
                      const double* init, double* out) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    row_block<4>(in, inner, mat, width, init, out, r);
  }
  for (; r < rows; ++r) {
    row_block<1>(in, inner, mat, width, init, out, r);
  }
}

}  // namespace

void affine(const Tensor& x, const Tensor& weight, const Tensor& bias,
            Tensor& y) {
  const std::size_t rows = x.rows();
  const std::size_t in = weight.rows();
  const std::size_t out = weight.cols();
  if (x.cols() != in || bias.size() != out) {
    throw ConfigError("affine: input " + x.shape_string() + " weight " +
                      weight.shape_string() + " bias " + bias.shape_string());
  }
  if (y.rows() != rows || y.cols() != out || y.rank() != 2) {
    y = Tensor::matrix(rows, out);
  }
  row_times_matrix(x.data(), rows, in, weight.data(), out, bias.data(),
                   y.data());
}

void affine_input_grad(const Tensor& dy, const Tensor& weight, Tensor& dx) {
  const std::size_t rows = dy.rows();
  const std::size_t in = weight.rows();
  const std::size_t out = weight.cols();
  std::vector<double> transposed(in * out);
  for (std::size_t k = 0; k < in; ++k) {
    for (std::size_t j = 0; j < out; ++j) {
      transposed[j * in + k] = weight[k * out + j];
    }
  }
  if (dx.rows() != rows || dx.cols() != in || dx.rank() != 2) {
    dx = Tensor::matrix(rows, in);
  }
  row_times_matrix(dy.data(), rows, out, transposed.data(), in, nullptr,
                   dx.data());
}

void affine_param_grad(const Tensor& x, const Tensor& dy, Tensor& dweight,
                       Tensor& dbias) {
  const std::size_t rows = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out = dy.cols();
  // Block over weight rows so a slab of dW stays cache resident while all
  // batch rows stream through it.
  constexpr std::size_t kBlock = 16;
  for (std::size_t k0 = 0; k0 < in; k0 += kBlock) {
    const std::size_t k1 = std::min(in, k0 + kBlock);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = dy.data() + r * out;
      for (std::size_t k = k0; k < k1; ++k) {
        axpy(x[r * in + k], g, dweight.data() + k * out, out);
      }
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out; ++j) {
      dbias[j] += dy[r * out + j];
    }
  }
}

double gate(double v) { return 0.5 * (1.0 + v / std::sqrt(1.0 + v * v)); }

void gated_linear(std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const double* in = x.data();
  double* out = y.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = in[i];
    out[i] = v * (0.5 * (1.0 + v / std::sqrt(1.0 + v * v)));
  }
}

void gated_linear_grad(std::span<const double> x, std::span<const double> dy,
                       std::span<double> dx) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    const double q = 1.0 + v * v;
    const double r = std::sqrt(q);
    // gate(v) + v * gate'(v), gate'(v) = 0.5 / q^1.5
    dx[i] = dy[i] * (0.5 * (1.0 + v / r) + v * (0.5 / (q * r)));
  }
}

}  // namespace diffpush::numerics::kernels
