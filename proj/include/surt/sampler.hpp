#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surt/data.hpp"
#include "surt/linalg.hpp"
#include "surt/priors.hpp"
#include "surt/rng.hpp"
#include "surt/trees.hpp"

namespace surt {

// ---- Scale hierarchy full conditionals (exposed for direct checks) ----

struct InvGammaParams {
  double shape = 0.0;
  double scale = 0.0;  // density proportional to x^(-shape-1) exp(-scale/x)
};

// Auxiliary scale a_j given the error covariance.
InvGammaParams scale_aux_full_conditional(double nu, int d, double a_scale_j,
                                          double sigma_inv_jj);

// Degrees of freedom of the error covariance full conditional.
double sigma_full_conditional_df(double nu, int d, int n);

// One Gibbs pass over (a, Sigma): a_j | Sigma then Sigma | a. resid_crossprod
// is the d x d sum of residual outer products over n rows; n = 0 with a zero
// matrix draws from the prior.
void update_scale_hierarchy(Rng& rng, double nu,
                            const std::vector<double>& a_scale,
                            const Matrix& resid_crossprod, int n,
                            std::vector<double>& a, Matrix& sigma);

// Diagonal-covariance variant: per-outcome variance and auxiliary updates.
void update_scale_independent(Rng& rng, double nu,
                              const std::vector<double>& a_scale,
                              const std::vector<double>& resid_sumsq, int n,
                              std::vector<double>& a, Matrix& sigma);

// ---- Probit correlation move ----

// Rescales an SPD matrix to unit diagonal.
Matrix correlation_from(const Matrix& w);

// One expanded-scale Metropolis-Hastings move for the probit error
// correlation. w is the chain state on the unconstrained scale (the model
// correlation is correlation_from(w)); its target combines an
// inverse-Wishart(nu + d - 1, I) prior with the Gaussian likelihood of the
// latent residuals, summarized by their crossprod and row count. The proposal
// is inverse-Wishart(nu_prop, nu_prop * w). Returns true on accept.
bool px_correlation_step(Rng& rng, Matrix& w, const Matrix& resid_crossprod,
                         int n, double nu, double nu_prop);

// ---- Samplers ----

struct EvalDesignSpec {
  std::string name;
  std::vector<std::vector<double>> x;  // training covariate schema
};

struct MoveStats {
  long proposed[3] = {0, 0, 0};  // grow, prune, change
  long accepted[3] = {0, 0, 0};
};

// Gibbs sampler for continuous outcomes: per-outcome tree updates against
// conditional offsets, then the covariance hierarchy.
class ContinuousSampler {
 public:
  ContinuousSampler(const Dataset& ds, const ModelConfig& cfg,
                    const CalibratedPriors& priors, std::uint64_t seed);

  // Registers a prediction design before the first step; returns its index.
  int add_design(const std::vector<std::vector<double>>& x);

  void step();  // one full sweep

  const Matrix& sigma() const { return sigma_; }
  const std::vector<double>& aux() const { return a_; }
  Matrix fitted() const;                 // n x d, current tree sums (scaled)
  Matrix design_fit(int design) const;   // rows x d, current tree sums
  void replace_scaled_outcomes(const Matrix& y_scaled);

  const Tree& tree(int j, int t) const { return forest_[j][t]; }
  void serialize_forest(int j, std::vector<unsigned char>& out) const;
  std::vector<double> importance_shares(int j) const;  // sums to 1, or zeros

  const MoveStats& moves() const { return moves_; }
  // Forces zero conditional offsets and v_j = sigma_jj (reduction check).
  void set_zero_offsets(bool on) { zero_offsets_ = on; }

 private:
  void tree_pass(int j, const std::vector<double>& u, double v);

  const Dataset& ds_;
  ModelConfig cfg_;
  CalibratedPriors priors_;
  Rng rng_;
  int n_, d_;
  Matrix y_;  // scaled outcomes, n x d
  std::vector<std::vector<Tree>> forest_;                 // [j][t]
  std::vector<std::vector<std::vector<int>>> assign_;     // [j][t][row]
  std::vector<std::vector<double>> resid_;                // [j][row]
  std::vector<double> a_;
  Matrix sigma_;
  std::vector<std::vector<std::vector<std::vector<int>>>> eval_assign_;
  std::vector<std::vector<std::vector<double>>> eval_x_;  // copies
  MoveStats moves_;
  bool zero_offsets_ = false;
  bool stepped_ = false;
};

// Probit counterpart: latent utilities with truncated-normal column updates
// and the expanded-scale correlation move.
class ProbitSampler {
 public:
  ProbitSampler(const Dataset& ds, const ModelConfig& cfg,
                const CalibratedPriors& priors, std::uint64_t seed);

  int add_design(const std::vector<std::vector<double>>& x);
  void step();

  const Matrix& sigma() const { return sigma_; }
  const Matrix& latent() const { return z_; }
  Matrix fitted() const;                // n x d tree sums, latent scale
  Matrix design_fit(int design) const;

  const Tree& tree(int j, int t) const { return forest_[j][t]; }
  void serialize_forest(int j, std::vector<unsigned char>& out) const;
  std::vector<double> importance_shares(int j) const;

  const MoveStats& moves() const { return moves_; }
  long px_proposed() const { return px_proposed_; }
  long px_accepted() const { return px_accepted_; }
  void set_zero_offsets(bool on) { zero_offsets_ = on; }

 private:
  void tree_pass(int j, const std::vector<double>& u, double v);

  const Dataset& ds_;
  ModelConfig cfg_;
  CalibratedPriors priors_;
  Rng rng_;
  int n_, d_;
  Matrix z_;  // latent utilities, n x d
  std::vector<std::vector<Tree>> forest_;
  std::vector<std::vector<std::vector<int>>> assign_;
  std::vector<std::vector<double>> resid_;  // z - fit
  Matrix sigma_;  // correlation
  Matrix w_;      // expanded-scale state
  std::vector<std::vector<std::vector<std::vector<int>>>> eval_assign_;
  std::vector<std::vector<std::vector<double>>> eval_x_;
  MoveStats moves_;
  long px_proposed_ = 0, px_accepted_ = 0;
  bool zero_offsets_ = false;
  bool stepped_ = false;
};

// ---- Chain driver ----

struct ChainResult {
  ModelConfig config;  // resolved
  OutcomeScaler scaler;
  CalibratedPriors priors;

  std::vector<std::string> design_names;  // [0] is always "train"
  std::vector<Matrix> sigma_all;          // one per sweep, scaled units
  std::vector<Matrix> sigma_retained;
  // fits[design][draw] is rows x d in scaled (continuous) or latent (probit)
  // units.
  std::vector<std::vector<Matrix>> fits;
  // forests[draw][j]: the m serialized trees of outcome j, concatenated.
  std::vector<std::vector<std::vector<unsigned char>>> forests;
  std::vector<Matrix> latents;  // probit, when store_latents
  Matrix importance;            // d x p average split share
  MoveStats moves;
  long px_proposed = 0, px_accepted = 0;
};

// Runs one chain: validates, scales, calibrates, samples, and captures
// per-draw fits for the registered designs.
ChainResult run_chain(const Dataset& ds, const ModelConfig& cfg,
                      const std::vector<EvalDesignSpec>& designs,
                      std::uint64_t seed);

// cfg.n_chains chains from seeds derived from cfg.seed.
std::vector<ChainResult> run_chains(const Dataset& ds, const ModelConfig& cfg,
                                    const std::vector<EvalDesignSpec>& designs);

}  // namespace surt
