#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace surt {

enum class ColumnKind { Continuous, Categorical };

enum class Mode { Continuous, Probit };

// Covariates are stored column-major as doubles; categorical columns hold
// integer level codes 0..levels-1. Outcomes are column-major as well.
struct Dataset {
  std::vector<std::string> x_names;
  std::vector<ColumnKind> x_kinds;
  std::vector<int> x_levels;  // 0 for continuous columns
  std::vector<std::vector<double>> x;

  std::vector<std::string> y_names;
  std::vector<std::vector<double>> y;

  int n() const { return x.empty() ? (y.empty() ? 0 : static_cast<int>(y[0].size())) : static_cast<int>(x[0].size()); }
  int p() const { return static_cast<int>(x.size()); }
  int d() const { return static_cast<int>(y.size()); }
};

// Probit when every outcome column is {0,1}-valued, continuous otherwise.
Mode infer_mode(const Dataset& ds);

// Full structural validation: non-empty, finite, categorical codes integral
// and in range, binary outcomes in probit mode, non-constant outcomes in
// continuous mode.
void validate_dataset(const Dataset& ds, Mode mode);

// Checks covariates of a prediction table against the training schema
// (same columns, kinds, and only seen categorical levels).
void validate_covariates_against(const Dataset& train,
                                 const std::vector<std::vector<double>>& x_new,
                                 const std::vector<ColumnKind>& kinds,
                                 const std::vector<int>& levels);

// Per-outcome affine map onto [-0.5, 0.5] from the observed training range.
struct OutcomeScaler {
  std::vector<double> ymin, ymax;

  static OutcomeScaler fit(const std::vector<std::vector<double>>& y);

  double range(int j) const { return ymax[j] - ymin[j]; }
  double scale(int j, double v) const {
    return (v - ymin[j]) / range(j) - 0.5;
  }
  double unscale(int j, double v) const {
    return (v + 0.5) * range(j) + ymin[j];
  }
  std::vector<double> scale_column(int j, const std::vector<double>& col) const;
};

struct ModelConfig {
  Mode mode = Mode::Continuous;
  bool mode_declared = false;  // when false, fit infers from the outcomes
  bool independence = false;   // diagonal error covariance variant

  int m = 100;
  double kappa = 2.0;
  double q_z = 3.0;  // probit leaf-prior numerator
  double alpha = 0.95;
  double beta = 2.0;
  double nu = 2.0;
  double alpha_sigma = 0.95;

  int n_mcmc = -1;    // -1: 5000 continuous / 10000 probit
  int n_burnin = -1;  // -1: 1000 continuous / 2000 probit
  double nu_prop = -1.0;  // -1: n/10 when d == 2, n/2 when d >= 3

  double p_grow = 0.25;
  double p_prune = 0.25;
  double p_change = 0.5;

  std::uint64_t seed = 20100826;
  int n_chains = 1;
  bool store_forests = true;
  bool store_latents = false;  // probit latent snapshots

  // Fills mode-dependent defaults; call once mode/n/d are known.
  void resolve(Mode resolved_mode, int n, int d);
  void validate(int d) const;
};

}  // namespace surt
