#pragma once

#include <cstdint>
#include <vector>

#include "surt/data.hpp"

namespace surt {

// Probability that a node at the given depth is non-terminal:
// alpha * (1 + depth)^(-beta)
double tree_split_probability(int depth, double alpha, double beta);

// Leaf-value prior standard deviations
double leaf_prior_sd_continuous(int m, double kappa);
double leaf_prior_sd_probit(int m, double kappa, double q_z);

// CDF of the half-t distribution with nu degrees of freedom and scale a at
// x >= 0 (0 below zero).
double half_t_cdf(double x, double nu, double a_scale);

// Solves half_t_cdf(sigma_hat, nu, a) = alpha_sigma for the scale a by
// bracketed bisection (relative tolerance 1e-10 on a).
double calibrate_half_t_scale(double sigma_hat, double nu, double alpha_sigma);

struct SigmaHatResult {
  double sigma_hat = 0.0;
  bool used_lasso = false;
};

// Residual standard deviation of a linear pilot fit of y on the dummy-encoded
// covariates. Ordinary least squares with df adjustment normally; an
// L1-regularized fit chosen by 5-fold cross-validation when n <= p_encoded+1.
// The fold shuffle is deterministic in the seed.
SigmaHatResult estimate_sigma_hat(const Dataset& ds,
                                  const std::vector<double>& y,
                                  std::uint64_t seed);

struct CalibratedPriors {
  std::vector<double> sigma_hat;  // scaled outcome units; empty in probit mode
  std::vector<double> sigma_hat_lasso;  // 1.0 flags per outcome, parallel
  std::vector<double> a_scale;    // half-t scales; empty in probit mode
  double leaf_sd = 0.0;
};

// Continuous mode: per-outcome sigma-hat on the scaled outcomes, half-t scale
// from the calibration equation, and the continuous leaf sd. Probit mode:
// only the probit leaf sd (error scale is fixed at 1).
CalibratedPriors calibrate_priors(const Dataset& ds, const ModelConfig& cfg,
                                  const OutcomeScaler* scaler);

}  // namespace surt
