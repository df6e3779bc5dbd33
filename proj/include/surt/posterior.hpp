#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surt/data.hpp"
#include "surt/linalg.hpp"
#include "surt/sampler.hpp"

namespace surt {

// Re-evaluates every retained draw's forests on new covariates. Output
// matrices are rows x d in scaled (continuous) or latent (probit) units.
// Requires the chain to have stored forests.
std::vector<Matrix> evaluate_forests(const ChainResult& chain,
                                     const std::vector<std::vector<double>>& x);

// Per-draw predictive matrices in original outcome units: unscaled forest
// fits, optionally with MVN(0, Sigma_draw) noise from a stream that is
// independent of the chain's.
std::vector<Matrix> predictive_draws_continuous(const ChainResult& chain,
                                                const std::vector<Matrix>& fits,
                                                std::uint64_t noise_seed,
                                                bool with_noise);

// Per-draw success probabilities Phi(z-hat) from latent-scale fits.
std::vector<Matrix> probability_draws_probit(const std::vector<Matrix>& fits);

struct PredictiveSummary {
  Matrix mean;  // rows x d
  Matrix lo, hi;
};

// Posterior mean and equal-tailed interval at `level`, cell by cell.
PredictiveSummary summarize_draws(const std::vector<Matrix>& draws,
                                  double level);

struct Interval {
  double lo = 0.0, hi = 0.0;
};

// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> draws, double p);

Interval quantile_interval(const std::vector<double>& draws, double level);

// Fraction of truths falling inside their interval (closed endpoints).
double interval_coverage(const std::vector<Interval>& intervals,
                         const std::vector<double>& truth);

double rmse(const std::vector<double>& pred, const std::vector<double>& truth);

// Sample CRPS with the all-pairs spread estimator,
//   mean_i [ mean_k |X_ik - y_i| - 1/2 mean_{k,l} |X_ik - X_il| ],
// computed per row from sorted draws in O(M log M).
double crps(const std::vector<Matrix>& draws,
            const std::vector<double>& truth, int outcome);

// Mean of -[y log p + (1-y) log(1-p)] with p clipped to [1e-12, 1 - 1e-12].
double log_loss(const std::vector<double>& prob,
                const std::vector<double>& truth);

// Fraction classified correctly at the 0.5 threshold.
double accuracy(const std::vector<double>& prob,
                const std::vector<double>& truth);

// Converts a scaled-unit covariance draw to original outcome units.
Matrix sigma_to_original(const OutcomeScaler& scaler, const Matrix& sigma);

// Wide trace table over all sweeps: an iteration column plus one column per
// covariance entry (upper triangle; off-diagonal only for probit chains,
// whose diagonal is fixed at one).
struct TraceTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};

TraceTable sigma_traces(const ChainResult& chain);

}  // namespace surt
