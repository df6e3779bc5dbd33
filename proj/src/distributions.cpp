#include "surt/distributions.hpp"

#include <cmath>

#include "surt/errors.hpp"
#include "surt/special.hpp"

namespace surt {

ConditionalNormalParams conditional_normal_params(const Matrix& sigma, int j) {
  const int d = static_cast<int>(sigma.rows());
  if (j < 0 || j >= d)
    fail(ErrorCode::InvalidArgument, "conditional_normal_params: bad index");
  ConditionalNormalParams out;
  if (d == 1) {
    out.variance = sigma(0, 0);
    return out;
  }
  Matrix rest(d - 1, d - 1);
  Vector cross(d - 1);
  int r = 0;
  for (int a = 0; a < d; ++a) {
    if (a == j) continue;
    cross(r) = sigma(a, j);
    int c = 0;
    for (int b = 0; b < d; ++b) {
      if (b == j) continue;
      rest(r, c++) = sigma(a, b);
    }
    ++r;
  }
  const Matrix l = chol_spd(rest);
  Vector w = l.triangularView<Eigen::Lower>().solve(cross);
  const double quad = w.squaredNorm();  // cross^T rest^{-1} cross
  w = l.transpose().triangularView<Eigen::Upper>().solve(w);
  out.weights.assign(w.data(), w.data() + d - 1);
  out.variance = sigma(j, j) - quad;
  if (!(out.variance > 0.0))
    fail(ErrorCode::NotPositiveDefinite,
         "conditional variance is not positive");
  return out;
}

Vector mvn_sample(Rng& rng, const Vector& mean, const Matrix& chol_lower) {
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + chol_lower.triangularView<Eigen::Lower>() * z;
}

double inv_gamma_sample(Rng& rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    fail(ErrorCode::InvalidArgument,
         "inv_gamma_sample: shape and scale must be positive");
  return 1.0 / rng.gamma(shape, 1.0 / scale);
}

Matrix wishart_sample(Rng& rng, double df, const Matrix& scale) {
  const int d = static_cast<int>(scale.rows());
  if (!(df > d - 1))
    fail(ErrorCode::InvalidDf, "wishart_sample: df must exceed d-1");
  const Matrix l = chol_spd(scale);
  Matrix a = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chisq(df - i));
    for (int k = 0; k < i; ++k) a(i, k) = rng.normal();
  }
  const Matrix la = l.triangularView<Eigen::Lower>() * a;
  return la * la.transpose();
}

Matrix inv_wishart_sample(Rng& rng, double df, const Matrix& scale) {
  const Matrix w = wishart_sample(rng, df, spd_inverse(scale));
  return spd_inverse(w);
}

double inv_wishart_logpdf(const Matrix& x, double df, const Matrix& scale) {
  const int d = static_cast<int>(x.rows());
  if (!(df > d - 1))
    fail(ErrorCode::InvalidDf, "inv_wishart_logpdf: df must exceed d-1");
  const Matrix lx = chol_spd(x);
  const Matrix ls = chol_spd(scale);
  const double logdet_x = logdet_from_chol(lx);
  const double logdet_s = logdet_from_chol(ls);
  // tr(scale x^{-1}) = |L_x^{-1} L_s|_F^2
  const Matrix m = lx.triangularView<Eigen::Lower>().solve(ls);
  const double trace_term = m.squaredNorm();
  return 0.5 * df * logdet_s - 0.5 * df * d * std::log(2.0) -
         lgamma_multivariate(d, 0.5 * df) -
         0.5 * (df + d + 1.0) * logdet_x - 0.5 * trace_term;
}

namespace {

// standard normal truncated to (a, inf)
double std_normal_lower_truncated(Rng& rng, double a) {
  if (a <= 4.0) {
    const double fa = norm_cdf(a);
    return norm_quantile(fa + rng.uniform_pos() * (1.0 - fa));
  }
  // Robert-style shifted-exponential rejection for the far tail
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (int it = 0; it < 10000; ++it) {
    const double x = a + rng.exponential() / lambda;
    const double diff = x - lambda;
    if (rng.uniform() <= std::exp(-0.5 * diff * diff)) return x;
  }
  fail(ErrorCode::TailSamplingFailure,
       "truncated normal tail rejection did not accept within 10000 tries");
}

}  // namespace

double truncated_normal_sample(Rng& rng, double mean, double sd,
                               bool positive_side) {
  if (!(sd > 0.0))
    fail(ErrorCode::InvalidArgument, "truncated_normal_sample: sd must be > 0");
  if (positive_side)
    return mean + sd * std_normal_lower_truncated(rng, -mean / sd);
  return -(-mean + sd * std_normal_lower_truncated(rng, mean / sd));
}

}  // namespace surt
