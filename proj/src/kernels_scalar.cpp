#include "surt/kernels.hpp"

namespace surt::kernels {
namespace {

double sum_(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sumsq_diff_(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void sub_(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void axpy_(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gather_add_(double* out, const double* base, const double* vals,
                 const std::int32_t* idx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + vals[idx[i]];
}

void gather_sub_(double* out, const double* base, const double* vals,
                 const std::int32_t* idx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = base[i] - vals[idx[i]];
}

double sum_rows_(const double* x, const std::int32_t* rows, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += x[rows[k]];
  return s;
}

void sum_sumsq_rows_(const double* x, const std::int32_t* rows, std::size_t n,
                     double* s, double* ss) {
  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
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

const Ops kScalar = {
    "scalar",    sum_,        dot_,       sumsq_diff_,
    sub_,        axpy_,       gather_add_, gather_sub_,
    sum_rows_,   sum_sumsq_rows_, add_const_rows_,
};

}  // namespace

const Ops& scalar() { return kScalar; }

}  // namespace surt::kernels
