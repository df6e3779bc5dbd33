#include <immintrin.h>

#include "surt/kernels.hpp"

// AVX2+FMA variants. Reductions run four independent lanes and combine at the
// end, so their rounding differs from the scalar reference; element-wise ops
// produce bitwise-identical results. add_const_rows stays scalar: AVX2 has no
// scatter and the row lists are short.

namespace surt::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double sum_(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sumsq_diff_(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void sub_(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void axpy_(double* y, double a, const double* x, std::size_t n) {
  // mul+add rather than fma: element-wise ops must round exactly like the
  // scalar reference (both TUs build with -ffp-contract=off)
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i,
                     _mm256_add_pd(_mm256_loadu_pd(y + i),
                                   _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

void gather_add_(double* out, const double* base, const double* vals,
                 const std::int32_t* idx, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    __m256d g = _mm256_i32gather_pd(vals, vi, 8);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(base + i), g));
  }
  for (; i < n; ++i) out[i] = base[i] + vals[idx[i]];
}

void gather_sub_(double* out, const double* base, const double* vals,
                 const std::int32_t* idx, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    __m256d g = _mm256_i32gather_pd(vals, vi, 8);
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(base + i), g));
  }
  for (; i < n; ++i) out[i] = base[i] - vals[idx[i]];
}

double sum_rows_(const double* x, const std::int32_t* rows, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(rows + k));
    acc = _mm256_add_pd(acc, _mm256_i32gather_pd(x, vi, 8));
  }
  double s = hsum(acc);
  for (; k < n; ++k) s += x[rows[k]];
  return s;
}

void sum_sumsq_rows_(const double* x, const std::int32_t* rows, std::size_t n,
                     double* s, double* ss) {
  __m256d acc = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(rows + k));
    __m256d g = _mm256_i32gather_pd(x, vi, 8);
    acc = _mm256_add_pd(acc, g);
    acc2 = _mm256_fmadd_pd(g, g, acc2);
  }
  double a = hsum(acc), b = hsum(acc2);
  for (; k < n; ++k) {
    const double v = x[rows[k]];
    a += v;
    b += v * v;
  }
  *s = a;
  *ss = b;
}

void add_const_rows_(double* x, double c, const std::int32_t* rows,
                     std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) x[rows[k]] += c;
}

const Ops kAvx2 = {
    "avx2",      sum_,        dot_,        sumsq_diff_,
    sub_,        axpy_,       gather_add_, gather_sub_,
    sum_rows_,   sum_sumsq_rows_, add_const_rows_,
};

}  // namespace

const Ops& avx2() { return kAvx2; }

}  // namespace surt::kernels
