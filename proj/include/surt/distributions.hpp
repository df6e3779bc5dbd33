#pragma once

#include <vector>

#include "surt/linalg.hpp"
#include "surt/rng.hpp"

namespace surt {

// Weights and variance of one coordinate of a multivariate normal given the
// others: mean offset = weights . (y_other - mean_other), variance =
// sigma_jj - sigma_j,other . weights. For d = 1 weights are empty and the
// variance is sigma_00.
struct ConditionalNormalParams {
  std::vector<double> weights;  // length d-1, ordered by the other indices
  double variance = 0.0;
};

// j is the 0-based coordinate being conditioned on the rest.
ConditionalNormalParams conditional_normal_params(const Matrix& sigma, int j);

// mean + chol_lower * z with z iid standard normal
Vector mvn_sample(Rng& rng, const Vector& mean, const Matrix& chol_lower);

// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale/x)
double inv_gamma_sample(Rng& rng, double shape, double scale);

// Wishart_d(df, scale) via the Bartlett decomposition; df > d-1 (non-integer
// allowed).
Matrix wishart_sample(Rng& rng, double df, const Matrix& scale);

// Inverse-Wishart_d(df, scale): inverse of Wishart_d(df, scale^{-1})
Matrix inv_wishart_sample(Rng& rng, double df, const Matrix& scale);

// log density of Inverse-Wishart_d(df, scale) at x
double inv_wishart_logpdf(const Matrix& x, double df, const Matrix& scale);

// One-sided truncated normal: the positive side is (0, inf), the other is
// (-inf, 0]. Inverse-CDF when the standardized bound is within 4 sd,
// exponential-proposal rejection beyond that; rejection gives up after 10000
// attempts (TailSamplingFailure).
double truncated_normal_sample(Rng& rng, double mean, double sd,
                               bool positive_side);

}  // namespace surt
