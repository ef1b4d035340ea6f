// AVX2/FMA kernels, 4-wide double lanes. This translation unit is compiled
// with -mavx2 -mfma; the dispatcher only hands out this table after checking
// cpuid, so nothing here runs on machines without the extensions.
//
// Elementwise kernels process the tail with the same fused operations as the
// vector body and therefore match the scalar reference bit for bit. The
// reductions accumulate four partial lanes and combine at the end, which
// reorders the sums relative to the scalar reference.

#include "skelact/kernels.hpp"

#if defined(SKELACT_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace skelact::kernels {
namespace {

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, vx, vy));
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void add_scalar_avx2(std::size_t n, double a, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), va));
  }
  for (; i < n; ++i) y[i] += a;
}

void scale_avx2(std::size_t n, double a, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
  }
  for (; i < n; ++i) y[i] *= a;
}

void add_avx2(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_avx2(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc_avx2(std::size_t n, const double* x, const double* y, double* acc) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(acc + i);
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(_mm256_loadu_pd(x + i),
                                              _mm256_loadu_pd(y + i), va));
  }
  for (; i < n; ++i) acc[i] = std::fma(x[i], y[i], acc[i]);
}

void lerp_avx2(std::size_t n, double t, const double* x, const double* y,
               double* out) {
  const double u = 1.0 - t;
  const __m256d vt = _mm256_set1_pd(t);
  const __m256d vu = _mm256_set1_pd(u);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d uy = _mm256_mul_pd(vu, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vt, _mm256_loadu_pd(x + i), uy));
  }
  for (; i < n; ++i) out[i] = std::fma(t, x[i], u * y[i]);
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

double sum_avx2(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{
      "avx2",   axpy_avx2, add_scalar_avx2, scale_avx2, add_avx2,
      mul_avx2, mul_acc_avx2, lerp_avx2, dot_avx2, sum_avx2,
  };
  return table;
}

}  // namespace skelact::kernels

#endif  // SKELACT_HAVE_AVX2
