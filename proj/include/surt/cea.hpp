#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surt/data.hpp"
#include "surt/linalg.hpp"
#include "surt/sampler.hpp"

namespace surt {

// Posterior-mean treatment probabilities Pr(t=1 | x) from a single-outcome
// probit fit of the treatment indicator on the covariates. The treatment must
// be {0,1}-valued and non-constant.
std::vector<double> fit_propensity(const Dataset& ds,
                                   const std::vector<double>& treatment,
                                   const ModelConfig& cfg, std::uint64_t seed);

// A fitted outcome model for treatment-effect analysis. The chain was run on
// the covariates augmented with the treatment indicator (and optionally the
// propensity score), capturing per-draw fits with the treatment column forced
// to 1 and to 0 while every other column stays at its observed value.
struct CeaFit {
  ChainResult chain;
  std::vector<double> propensity;          // empty when fitted without the score
  std::vector<std::string> design_columns; // augmented covariate names
  int treat1 = -1;                         // indices into chain.fits
  int treat0 = -1;
};

// Fits a continuous model of (cost, effect) on (x, t[, ps]). Outcomes are
// taken in that order: column 0 is cost, column 1 is effect. The covariates
// must not already contain a column named "treatment" or (when the score is
// requested) "propensity".
CeaFit cea_fit(const Dataset& ds, const std::vector<double>& treatment,
               const ModelConfig& cfg, bool use_propensity,
               std::uint64_t seed);

// Per-retained-draw average treatment effects in original outcome units.
struct CeaDraws {
  std::vector<double> delta_c;
  std::vector<double> delta_q;
};

CeaDraws mate_draws(const CeaFit& fit);

// INB_lambda = lambda * delta_q - delta_c per draw; lambda >= 0.
std::vector<double> inb_draws(const CeaDraws& draws, double lambda);

// 0 to 80000 in steps of 1000.
std::vector<double> default_lambda_grid();

struct CeacPoint {
  double lambda = 0.0;
  double probability = 0.0;  // fraction of draws with INB > 0
};

std::vector<CeacPoint> ceac(const CeaDraws& draws,
                            const std::vector<double>& grid);

// Phi((lambda E[dq] - E[dc]) / sqrt(lambda^2 V[dq] + V[dc] - 2 lambda cov)),
// the closed-form cost-effectiveness probability under joint normality.
// Throws when the variance of the net benefit is not positive.
double normal_theory_ce_probability(double mean_dq, double mean_dc,
                                    double var_dq, double var_dc, double cov,
                                    double lambda);

// Per-row posterior means of the toggle differences and of the per-draw
// conditional net benefit lambda * tau_q(x) - tau_c(x).
struct CateTable {
  std::vector<double> tau_c;
  std::vector<double> tau_q;
  std::vector<double> cinb;
};

CateTable cate_cinb(const CeaFit& fit, double lambda);

// Split-usage shares recomputed from the stored forests; equals
// chain.importance when forests were retained.
Matrix importance_from_forests(const ChainResult& chain);

}  // namespace surt
