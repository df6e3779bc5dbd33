#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "surt/data.hpp"
#include "surt/linalg.hpp"

namespace surt {

// Covariance assembled from per-outcome sds and the upper-triangle
// correlations in row-major pair order (01, 02, ..., 12, ...). Must be SPD.
Matrix covariance_from_correlations(const std::vector<double>& sd,
                                    const std::vector<double>& rho);

// Benchmark error scales: d=2 uses sds (1, 10) with correlation 0.75; d=3
// uses sds (1, 2.5, 5) with correlations (0.80, 0.50, 0.25); d=1 is the
// first outcome alone.
Matrix friedman_sigma(int d);
// Unit-variance version for the binary scenario.
Matrix friedman_correlation(int d);

// Ten uniform covariates; outcome means
//   10 sin(pi x1 x2) + 20 (x3 - 1/2)^2,  8 x4 + 20 sin(pi x1),
//   10 x5 - 5 x2 - 5 x4,
// with MVN errors from friedman_sigma(d). d < 3 keeps the leading outcomes.
struct Friedman1Sample {
  Dataset data;
  Matrix true_mean;  // n x d
  Matrix sigma;
};

Friedman1Sample gen_friedman1(int n, int d, std::uint64_t seed);
// Explicit SPD error covariance instead of the preset.
Friedman1Sample gen_friedman1(int n, int d, std::uint64_t seed,
                              const Matrix& sigma);

// Binary counterpart: latent means
//   sin(pi x1 x2) + x3^3,  -1 + 2 x1 x4 + exp(x5),  (x2 + x4) / 2 + x5,
// unit-variance MVN latent errors, y = 1{latent > 0}. probability holds the
// marginal Phi(latent mean) per cell.
struct Friedman2Sample {
  Dataset data;
  Matrix latent_mean;
  Matrix probability;
  Matrix sigma;  // correlation
};

Friedman2Sample gen_friedman2(int n, int d, std::uint64_t seed);
// Explicit latent correlation matrix; the diagonal must be one.
Friedman2Sample gen_friedman2(int n, int d, std::uint64_t seed,
                              const Matrix& sigma);

// Observational cost-effectiveness trial with targeted selection. Eleven
// covariates are synthesized to match the motivating study's baseline
// marginals and stored on their original scales; inside the mean functions
// the continuous ones (and the education level index) enter standardized
// within sample, written x1, x3, x10, x11 below.
//   cost  = 2000 + 500 x1 - 200 x3 + 500 x10 + 500 t + e1
//   qaly  = 0.5 + 0.2 (x2 + 1) sin(x1) + t (0.1 exp(-x11) - 0.1) + e2
// with error sds (500, 0.05) and correlation rho. Treatment is Bernoulli of
//   0.9 Phi(-0.5 + x10 - 1.5 std(mu_q)) + 0.05,
// so assignment tracks the expected untreated outcome. Truths are sample
// averages of the row effects.
struct TtcmSample {
  Dataset data;  // (cost, effect) outcomes; treatment kept separate
  std::vector<double> treatment;
  std::vector<double> propensity;
  std::vector<double> tau_c, tau_q;
  double delta_c = 0.0, delta_q = 0.0;
  Matrix sigma;
};

TtcmSample gen_ttcm(int n, double rho, std::uint64_t seed);

// lambda * delta_q - delta_c at each willingness-to-pay.
std::vector<double> true_inb_grid(const TtcmSample& sample,
                                  const std::vector<double>& lambdas);

// ---- Replicated experiments ------------------------------------------------

enum class Scenario { Friedman1, Friedman2, TtcmLike };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);

struct ScenarioSpec {
  Scenario scenario = Scenario::Friedman1;
  int n_train = 1000;
  int n_test = 1000;  // friedman scenarios only
  int d = 2;
  double rho = -0.25;  // ttcm error correlation
  std::uint64_t seed = 20100826;
};

// One fitted model variant on one replicate's data. Failures are recorded in
// `error` and leave the metric list empty.
struct ReplicateResult {
  int replicate = 0;
  std::string variant;
  std::vector<std::pair<std::string, double>> metrics;
  std::string error;
};

// Derived streams {data, test, chain, noise} for replicate r. Exposed so a
// caller can regenerate exactly the datasets a run_replicates call fitted.
std::array<std::uint64_t, 4> replicate_seeds(std::uint64_t spec_seed, int r);

// Variants: "subart", "ind-bart", and (ttcm only) "ps-subart",
// "ps-ind-bart". Each replicate generates fresh data from a seed derived
// from spec.seed and fits every variant on it; chains use base_cfg with the
// mode, independence flag, and seed overridden. Results are ordered by
// (replicate, variant) regardless of thread count.
std::vector<ReplicateResult> run_replicates(
    const ScenarioSpec& spec, const std::vector<std::string>& variants,
    int replicates, const ModelConfig& base_cfg, int threads = 1);

// Aggregate across replicates. Estimands (metrics reported as <name>_est
// with a matching <name>_true) get error statistics over est - true: bias is
// the mean error, sd the (n-1)-denominator error spread, rmse the root mean
// squared error, so rmse^2 = bias^2 + sd^2 (R-1)/R exactly. When <name>_lo
// and <name>_hi are present, ci_cover is the fraction of replicates whose
// interval contains the truth and ci_width the mean interval length.
// Standalone metrics fill mean and sd only. Failed replicates are skipped.
struct MetricSummary {
  std::string variant;
  std::string name;
  int replicates = 0;
  double bias = 0.0, sd = 0.0, rmse = 0.0;
  double mean = 0.0;
  double ci_cover = 0.0, ci_width = 0.0;
  bool estimand = false;   // bias/sd/rmse filled
  bool has_interval = false;
};

std::vector<MetricSummary> summarize_metrics(
    const std::vector<ReplicateResult>& rows);

}  // namespace surt
