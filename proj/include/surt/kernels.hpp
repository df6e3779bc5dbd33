#pragma once

#include <cstddef>
#include <cstdint>

namespace surt::kernels {

// Flat array passes used by the sampler's inner loops. Every operation has a
// scalar reference implementation; on x86 an AVX2 variant is compiled in and
// selected at runtime. Element-wise ops must agree bitwise with the
// reference; reductions may reassociate and agree only to floating-point
// tolerance (pinned in test_kernels). The table is chosen once per process,
// so a given build on a given machine always takes the same code path.
struct Ops {
  const char* name;

  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum of (a[i] - b[i])^2
  double (*sumsq_diff)(const double* a, const double* b, std::size_t n);
  // out[i] = a[i] - b[i]; out may alias a
  void (*sub)(double* out, const double* a, const double* b, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double* y, double a, const double* x, std::size_t n);
  // out[i] = base[i] + vals[idx[i]]; out may alias base
  void (*gather_add)(double* out, const double* base, const double* vals,
                     const std::int32_t* idx, std::size_t n);
  // out[i] = base[i] - vals[idx[i]]; out may alias base
  void (*gather_sub)(double* out, const double* base, const double* vals,
                     const std::int32_t* idx, std::size_t n);
  // sum of x[rows[k]]
  double (*sum_rows)(const double* x, const std::int32_t* rows, std::size_t n);
  // sum and sum of squares of x[rows[k]]
  void (*sum_sumsq_rows)(const double* x, const std::int32_t* rows,
                         std::size_t n, double* s, double* ss);
  // x[rows[k]] += c; rows must not repeat an index
  void (*add_const_rows)(double* x, double c, const std::int32_t* rows,
                         std::size_t n);
};

const Ops& scalar();

// True when the CPU supports AVX2+FMA and the variant was compiled in.
bool avx2_supported();
const Ops& avx2();  // only valid when avx2_supported()

// Runtime-selected table. SURT_KERNELS=scalar|avx2 overrides the automatic
// choice (requesting avx2 on an unsupported CPU falls back to scalar).
const Ops& active();

}  // namespace surt::kernels
