#include "surt/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <thread>
#include <utility>

#include "surt/cea.hpp"
#include "surt/errors.hpp"
#include "surt/posterior.hpp"
#include "surt/rng.hpp"
#include "surt/sampler.hpp"
#include "surt/special.hpp"

namespace surt {
namespace {

constexpr double kPi = 3.14159265358979323846;

int pair_count(int d) { return d * (d - 1) / 2; }

std::vector<std::pair<int, int>> upper_pairs(int d) {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) out.push_back({a, b});
  return out;
}

void check_friedman_dims(int n, int d) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "sample size must be positive");
  if (d < 1 || d > 3)
    fail(ErrorCode::InvalidArgument,
         "benchmark scenarios define at most three outcomes");
}

Dataset uniform_covariates(Rng& rng, int n) {
  Dataset ds;
  ds.x_names.reserve(10);
  for (int c = 0; c < 10; ++c) ds.x_names.push_back("x" + std::to_string(c + 1));
  ds.x_kinds.assign(10, ColumnKind::Continuous);
  ds.x_levels.assign(10, 0);
  ds.x.assign(10, std::vector<double>(n));
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < n; ++i) ds.x[c][i] = rng.uniform();
  return ds;
}

// mean, sd -> (mu, sigma) of the matching lognormal
std::pair<double, double> lognormal_params(double mean, double sd) {
  const double s2 = std::log(1.0 + (sd / mean) * (sd / mean));
  return {std::log(mean) - 0.5 * s2, std::sqrt(s2)};
}

double categorical_draw(Rng& rng, const std::vector<double>& probs) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    cum += probs[k];
    if (u < cum) return static_cast<double>(k);
  }
  return static_cast<double>(probs.size() - 1);
}

double truncated_normal_two_sided(Rng& rng, double mean, double sd, double lo,
                                  double hi) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double v = rng.normal(mean, sd);
    if (v >= lo && v <= hi) return v;
  }
  fail(ErrorCode::TailSamplingFailure, "truncated normal rejection stalled");
}

std::vector<double> standardized(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  std::vector<double> out(n, 0.0);
  if (sd > 0.0)
    for (int i = 0; i < n; ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

}  // namespace

Matrix covariance_from_correlations(const std::vector<double>& sd,
                                    const std::vector<double>& rho) {
  const int d = static_cast<int>(sd.size());
  if (d < 1) fail(ErrorCode::InvalidArgument, "no outcome scales");
  if (static_cast<int>(rho.size()) != pair_count(d))
    fail(ErrorCode::InvalidArgument,
         "need one correlation per outcome pair");
  for (double s : sd)
    if (!(s > 0.0))
      fail(ErrorCode::InvalidArgument, "outcome sds must be positive");
  for (double r : rho)
    if (!(r > -1.0 && r < 1.0))
      fail(ErrorCode::InvalidArgument, "correlations must lie in (-1, 1)");
  Matrix s = Matrix::Zero(d, d);
  int k = 0;
  for (int a = 0; a < d; ++a) {
    s(a, a) = sd[a] * sd[a];
    for (int b = a + 1; b < d; ++b, ++k) {
      s(a, b) = rho[k] * sd[a] * sd[b];
      s(b, a) = s(a, b);
    }
  }
  chol_spd(s);  // SPD or throw
  return s;
}

Matrix friedman_sigma(int d) {
  switch (d) {
    case 1:
      return covariance_from_correlations({1.0}, {});
    case 2:
      return covariance_from_correlations({1.0, 10.0}, {0.75});
    case 3:
      return covariance_from_correlations({1.0, 2.5, 5.0},
                                          {0.80, 0.50, 0.25});
    default:
      fail(ErrorCode::InvalidArgument, "no preset for this outcome count");
  }
}

Matrix friedman_correlation(int d) {
  switch (d) {
    case 1:
      return covariance_from_correlations({1.0}, {});
    case 2:
      return covariance_from_correlations({1.0, 1.0}, {0.75});
    case 3:
      return covariance_from_correlations({1.0, 1.0, 1.0},
                                          {0.80, 0.50, 0.25});
    default:
      fail(ErrorCode::InvalidArgument, "no preset for this outcome count");
  }
}

Friedman1Sample gen_friedman1(int n, int d, std::uint64_t seed) {
  return gen_friedman1(n, d, seed, friedman_sigma(d));
}

Friedman1Sample gen_friedman1(int n, int d, std::uint64_t seed,
                              const Matrix& sigma) {
  check_friedman_dims(n, d);
  if (sigma.rows() != d || sigma.cols() != d)
    fail(ErrorCode::InvalidArgument, "error covariance has the wrong size");
  Rng rng(seed);
  Friedman1Sample out;
  out.data = uniform_covariates(rng, n);
  out.sigma = sigma;
  out.true_mean.resize(n, d);
  const auto& x = out.data.x;
  for (int i = 0; i < n; ++i) {
    const double m1 = 10.0 * std::sin(kPi * x[0][i] * x[1][i]) +
                      20.0 * (x[2][i] - 0.5) * (x[2][i] - 0.5);
    const double m2 = 8.0 * x[3][i] + 20.0 * std::sin(kPi * x[0][i]);
    const double m3 = 10.0 * x[4][i] - 5.0 * x[1][i] - 5.0 * x[3][i];
    const double m[3] = {m1, m2, m3};
    for (int j = 0; j < d; ++j) out.true_mean(i, j) = m[j];
  }
  const Matrix l = chol_spd(out.sigma);
  out.data.y.assign(d, std::vector<double>(n));
  for (int j = 0; j < d; ++j)
    out.data.y_names.push_back("y" + std::to_string(j + 1));
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    const Vector e = l * z;
    for (int j = 0; j < d; ++j) out.data.y[j][i] = out.true_mean(i, j) + e(j);
  }
  return out;
}

Friedman2Sample gen_friedman2(int n, int d, std::uint64_t seed) {
  return gen_friedman2(n, d, seed, friedman_correlation(d));
}

Friedman2Sample gen_friedman2(int n, int d, std::uint64_t seed,
                              const Matrix& sigma) {
  check_friedman_dims(n, d);
  if (sigma.rows() != d || sigma.cols() != d)
    fail(ErrorCode::InvalidArgument, "latent correlation has the wrong size");
  for (int j = 0; j < d; ++j)
    if (std::abs(sigma(j, j) - 1.0) > 1e-12)
      fail(ErrorCode::InvalidArgument,
           "latent correlation needs a unit diagonal");
  Rng rng(seed);
  Friedman2Sample out;
  out.data = uniform_covariates(rng, n);
  out.sigma = sigma;
  out.latent_mean.resize(n, d);
  out.probability.resize(n, d);
  const auto& x = out.data.x;
  for (int i = 0; i < n; ++i) {
    const double m1 = std::sin(kPi * x[0][i] * x[1][i]) +
                      x[2][i] * x[2][i] * x[2][i];
    const double m2 = -1.0 + 2.0 * x[0][i] * x[3][i] + std::exp(x[4][i]);
    const double m3 = 0.5 * (x[1][i] + x[3][i]) + x[4][i];
    const double m[3] = {m1, m2, m3};
    for (int j = 0; j < d; ++j) {
      out.latent_mean(i, j) = m[j];
      out.probability(i, j) = norm_cdf(m[j]);
    }
  }
  const Matrix l = chol_spd(out.sigma);
  out.data.y.assign(d, std::vector<double>(n));
  for (int j = 0; j < d; ++j)
    out.data.y_names.push_back("y" + std::to_string(j + 1));
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    const Vector e = l * z;
    for (int j = 0; j < d; ++j)
      out.data.y[j][i] = (out.latent_mean(i, j) + e(j)) > 0.0 ? 1.0 : 0.0;
  }
  return out;
}

TtcmSample gen_ttcm(int n, double rho, std::uint64_t seed) {
  if (n < 2) fail(ErrorCode::InvalidArgument, "need at least two rows");
  if (!(rho > -1.0 && rho < 1.0))
    fail(ErrorCode::InvalidArgument, "correlation must lie in (-1, 1)");
  Rng rng(seed);
  TtcmSample out;

  // Baseline-table marginals, pooled over both arms.
  std::vector<double> age(n), gender(n), education(n), history(n), trauma(n),
      fracture(n), severity(n), admission(n), stay(n), surgery(n), tto(n);
  for (int i = 0; i < n; ++i)
    age[i] = truncated_normal_two_sided(rng, 46.0, 17.0, 18.0, 90.0);
  for (int i = 0; i < n; ++i) gender[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  for (int i = 0; i < n; ++i)
    education[i] = categorical_draw(rng, {0.10, 0.26, 0.64});
  for (int i = 0; i < n; ++i)
    history[i] = categorical_draw(rng, {0.59, 0.19, 0.22});
  for (int i = 0; i < n; ++i)
    trauma[i] = categorical_draw(
        rng, {69.0 / 140, 2.0 / 140, 44.0 / 140, 20.0 / 140, 5.0 / 140});
  for (int i = 0; i < n; ++i)
    fracture[i] =
        categorical_draw(rng, {56.0 / 140, 60.0 / 140, 8.0 / 140, 16.0 / 140});
  const auto sev = lognormal_params(8.2, 5.2);
  for (int i = 0; i < n; ++i)
    severity[i] = std::exp(rng.normal(sev.first, sev.second));
  for (int i = 0; i < n; ++i) admission[i] = rng.uniform() < 0.65 ? 1.0 : 0.0;
  const auto los = lognormal_params(8.3, 8.5);
  for (int i = 0; i < n; ++i)
    stay[i] = std::exp(rng.normal(los.first, los.second));
  for (int i = 0; i < n; ++i) surgery[i] = rng.uniform() < 0.53 ? 1.0 : 0.0;
  const double tto_shape = (20.3 / 15.1) * (20.3 / 15.1);
  const double tto_scale = 15.1 * 15.1 / 20.3;
  for (int i = 0; i < n; ++i) tto[i] = rng.gamma(tto_shape, tto_scale);

  const std::vector<double> x1 = standardized(age);
  const std::vector<double> x3 = standardized(education);
  const std::vector<double> x11 = standardized(tto);

  std::vector<double> mu_c(n), mu_q(n);
  out.tau_c.assign(n, 500.0);
  out.tau_q.resize(n);
  for (int i = 0; i < n; ++i) {
    mu_c[i] = 2000.0 + 500.0 * x1[i] - 200.0 * x3[i] + 500.0 * surgery[i];
    mu_q[i] = 0.5 + 0.2 * (gender[i] + 1.0) * std::sin(x1[i]);
    out.tau_q[i] = -0.1 + 0.1 * std::exp(-x11[i]);
  }
  const std::vector<double> mu_q_std = standardized(mu_q);

  out.propensity.resize(n);
  out.treatment.resize(n);
  for (int i = 0; i < n; ++i) {
    out.propensity[i] =
        0.9 * norm_cdf(-0.5 + surgery[i] - 1.5 * mu_q_std[i]) + 0.05;
    out.treatment[i] = rng.uniform() < out.propensity[i] ? 1.0 : 0.0;
  }

  out.sigma = covariance_from_correlations({500.0, 0.05}, {rho});
  const double root = std::sqrt(1.0 - rho * rho);
  out.data.y.assign(2, std::vector<double>(n));
  out.data.y_names = {"cost", "effect"};
  for (int i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double e1 = 500.0 * z1;
    const double e2 = 0.05 * (rho * z1 + root * z2);
    out.data.y[0][i] = mu_c[i] + out.treatment[i] * out.tau_c[i] + e1;
    out.data.y[1][i] = mu_q[i] + out.treatment[i] * out.tau_q[i] + e2;
  }

  out.data.x_names = {"age",      "gender",    "education", "history",
                      "trauma",   "fracture",  "severity",  "admission",
                      "stay",     "surgery",   "tto"};
  out.data.x_kinds = {ColumnKind::Continuous,  ColumnKind::Categorical,
                      ColumnKind::Categorical, ColumnKind::Categorical,
                      ColumnKind::Categorical, ColumnKind::Categorical,
                      ColumnKind::Continuous,  ColumnKind::Categorical,
                      ColumnKind::Continuous,  ColumnKind::Categorical,
                      ColumnKind::Continuous};
  out.data.x_levels = {0, 2, 3, 3, 5, 4, 0, 2, 0, 2, 0};
  out.data.x = {age,      gender,    education, history, trauma, fracture,
                severity, admission, stay,      surgery, tto};

  out.delta_c = 500.0;
  double acc = 0.0;
  for (double v : out.tau_q) acc += v;
  out.delta_q = acc / n;
  return out;
}

std::vector<double> true_inb_grid(const TtcmSample& sample,
                                  const std::vector<double>& lambdas) {
  std::vector<double> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.push_back(l * sample.delta_q - sample.delta_c);
  return out;
}

// ---- Replicated experiments ------------------------------------------------

Scenario parse_scenario(const std::string& name) {
  if (name == "friedman1") return Scenario::Friedman1;
  if (name == "friedman2") return Scenario::Friedman2;
  if (name == "ttcm_like") return Scenario::TtcmLike;
  fail(ErrorCode::InvalidConfig, "unknown scenario " + name);
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Friedman1: return "friedman1";
    case Scenario::Friedman2: return "friedman2";
    default: return "ttcm_like";
  }
}

namespace {

struct VariantPlan {
  std::string name;
  bool propensity = false;
  bool independence = false;
};

VariantPlan plan_variant(const std::string& name, Scenario scenario) {
  VariantPlan plan;
  plan.name = name;
  std::string rest = name;
  if (rest.rfind("ps-", 0) == 0) {
    plan.propensity = true;
    rest = rest.substr(3);
  }
  if (rest == "subart")
    plan.independence = false;
  else if (rest == "ind-bart")
    plan.independence = true;
  else
    fail(ErrorCode::InvalidConfig, "unknown model variant " + name);
  if (plan.propensity && scenario != Scenario::TtcmLike)
    fail(ErrorCode::InvalidConfig,
         "propensity variants apply to the treatment scenario only");
  return plan;
}

ModelConfig variant_config(const ModelConfig& base, Mode mode,
                           bool independence, std::uint64_t seed) {
  ModelConfig cfg = base;
  cfg.mode = mode;
  cfg.mode_declared = true;
  cfg.independence = independence;
  cfg.seed = seed;
  cfg.n_chains = 1;
  cfg.store_forests = false;
  cfg.store_latents = false;
  return cfg;
}

void push(ReplicateResult& row, const std::string& name, double value) {
  row.metrics.push_back({name, value});
}

void covariance_estimates(const std::vector<Matrix>& sigma_retained,
                          const OutcomeScaler* scaler, const Matrix& truth,
                          ReplicateResult& row) {
  const int d = static_cast<int>(truth.rows());
  std::vector<double> sd_mean(d, 0.0);
  const auto pairs = upper_pairs(d);
  std::vector<double> rho_mean(pairs.size(), 0.0);
  for (const Matrix& s : sigma_retained) {
    const Matrix orig = scaler ? sigma_to_original(*scaler, s) : s;
    for (int j = 0; j < d; ++j) sd_mean[j] += std::sqrt(orig(j, j));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [a, b] = pairs[k];
      rho_mean[k] += orig(a, b) / std::sqrt(orig(a, a) * orig(b, b));
    }
  }
  const double m = static_cast<double>(sigma_retained.size());
  if (scaler)
    for (int j = 0; j < d; ++j) {
      const std::string tag = std::to_string(j + 1);
      push(row, "sigma" + tag + "_est", sd_mean[j] / m);
      push(row, "sigma" + tag + "_true", std::sqrt(truth(j, j)));
    }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    const std::string tag = std::to_string(a + 1) + std::to_string(b + 1);
    push(row, "rho" + tag + "_est", rho_mean[k] / m);
    push(row, "rho" + tag + "_true",
         truth(a, b) / std::sqrt(truth(a, a) * truth(b, b)));
  }
}

void friedman1_variant(const ScenarioSpec& spec, const Friedman1Sample& train,
                       const Friedman1Sample& test, const VariantPlan& plan,
                       const ModelConfig& base, std::uint64_t chain_seed,
                       std::uint64_t noise_seed, ReplicateResult& row) {
  const ModelConfig cfg =
      variant_config(base, Mode::Continuous, plan.independence, chain_seed);
  std::vector<EvalDesignSpec> designs;
  designs.push_back({"test", test.data.x});
  const ChainResult chain = run_chain(train.data, cfg, designs, chain_seed);

  covariance_estimates(chain.sigma_retained, &chain.scaler, train.sigma, row);

  const auto clean =
      predictive_draws_continuous(chain, chain.fits[1], noise_seed, false);
  const auto noisy =
      predictive_draws_continuous(chain, chain.fits[1], noise_seed, true);
  const Matrix mean = summarize_draws(clean, 0.5).mean;
  const PredictiveSummary mid = summarize_draws(noisy, 0.5);
  const int n = static_cast<int>(test.data.n());
  for (int j = 0; j < spec.d; ++j) {
    const auto& y = test.data.y[j];
    std::vector<double> pred(n);
    for (int i = 0; i < n; ++i) pred[i] = mean(i, j);
    const std::string tag = std::to_string(j + 1);
    push(row, "rmse_test_" + tag, rmse(pred, y));
    int inside = 0;
    double width = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mid.lo(i, j) <= y[i] && y[i] <= mid.hi(i, j)) ++inside;
      width += mid.hi(i, j) - mid.lo(i, j);
    }
    push(row, "cover50_" + tag, inside / static_cast<double>(n));
    push(row, "width50_" + tag, width / n);
    push(row, "crps_" + tag, crps(noisy, y, j));
  }
}

void friedman2_variant(const ScenarioSpec& spec, const Friedman2Sample& train,
                       const Friedman2Sample& test, const VariantPlan& plan,
                       const ModelConfig& base, std::uint64_t chain_seed,
                       ReplicateResult& row) {
  const ModelConfig cfg =
      variant_config(base, Mode::Probit, plan.independence, chain_seed);
  std::vector<EvalDesignSpec> designs;
  designs.push_back({"test", test.data.x});
  const ChainResult chain = run_chain(train.data, cfg, designs, chain_seed);

  covariance_estimates(chain.sigma_retained, nullptr, train.sigma, row);

  const auto probs = probability_draws_probit(chain.fits[1]);
  const Matrix mean = summarize_draws(probs, 0.5).mean;
  const int n = test.data.n();
  const int n_train = train.data.n();
  for (int j = 0; j < spec.d; ++j) {
    const auto& y = test.data.y[j];
    std::vector<double> prob(n);
    for (int i = 0; i < n; ++i) prob[i] = mean(i, j);
    double rate = 0.0;
    for (double v : train.data.y[j]) rate += v;
    rate /= n_train;
    const std::vector<double> base_prob(n, rate);
    const std::string tag = std::to_string(j + 1);
    push(row, "logloss_" + tag, log_loss(prob, y));
    push(row, "logloss_base_" + tag, log_loss(base_prob, y));
    push(row, "acc_" + tag, accuracy(prob, y));
  }
  if (chain.px_proposed > 0)
    push(row, "px_accept",
         chain.px_accepted / static_cast<double>(chain.px_proposed));
}

void ttcm_variant(const TtcmSample& sample, const VariantPlan& plan,
                  const ModelConfig& base, std::uint64_t chain_seed,
                  ReplicateResult& row) {
  const ModelConfig cfg =
      variant_config(base, Mode::Continuous, plan.independence, chain_seed);
  const CeaFit fit =
      cea_fit(sample.data, sample.treatment, cfg, plan.propensity, chain_seed);
  const CeaDraws draws = mate_draws(fit);

  const auto summarize = [&row](const std::string& name,
                                const std::vector<double>& v, double truth) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    const Interval i50 = quantile_interval(v, 0.5);
    push(row, name + "_est", mean);
    push(row, name + "_true", truth);
    push(row, name + "_lo", i50.lo);
    push(row, name + "_hi", i50.hi);
  };
  summarize("delta_c", draws.delta_c, sample.delta_c);
  summarize("delta_q", draws.delta_q, sample.delta_q);
  summarize("inb20k", inb_draws(draws, 20000.0),
            20000.0 * sample.delta_q - sample.delta_c);
  summarize("inb50k", inb_draws(draws, 50000.0),
            50000.0 * sample.delta_q - sample.delta_c);
}

}  // namespace

std::array<std::uint64_t, 4> replicate_seeds(std::uint64_t spec_seed, int r) {
  const std::uint64_t rep_seed =
      splitmix64(spec_seed ^ splitmix64(1300 + static_cast<std::uint64_t>(r)));
  return {splitmix64(rep_seed ^ splitmix64(1)),
          splitmix64(rep_seed ^ splitmix64(2)),
          splitmix64(rep_seed ^ splitmix64(3)),
          splitmix64(rep_seed ^ splitmix64(4))};
}

std::vector<ReplicateResult> run_replicates(
    const ScenarioSpec& spec, const std::vector<std::string>& variants,
    int replicates, const ModelConfig& base_cfg, int threads) {
  if (replicates < 1)
    fail(ErrorCode::InvalidConfig, "need at least one replicate");
  if (variants.empty()) fail(ErrorCode::InvalidConfig, "no model variants");
  if (spec.scenario != Scenario::TtcmLike) {
    if (spec.n_test < 1)
      fail(ErrorCode::InvalidConfig, "benchmark scenarios need a test set");
    check_friedman_dims(spec.n_train, spec.d);
  }
  std::vector<VariantPlan> plans;
  for (const auto& v : variants) plans.push_back(plan_variant(v, spec.scenario));

  std::vector<std::vector<ReplicateResult>> slots(replicates);
  const auto run_one = [&](int r) {
    const auto seeds = replicate_seeds(spec.seed, r);
    const std::uint64_t data_seed = seeds[0];
    const std::uint64_t test_seed = seeds[1];
    const std::uint64_t chain_seed = seeds[2];
    const std::uint64_t noise_seed = seeds[3];

    Friedman1Sample f1_train, f1_test;
    Friedman2Sample f2_train, f2_test;
    TtcmSample ttcm;
    switch (spec.scenario) {
      case Scenario::Friedman1:
        f1_train = gen_friedman1(spec.n_train, spec.d, data_seed);
        f1_test = gen_friedman1(spec.n_test, spec.d, test_seed);
        break;
      case Scenario::Friedman2:
        f2_train = gen_friedman2(spec.n_train, spec.d, data_seed);
        f2_test = gen_friedman2(spec.n_test, spec.d, test_seed);
        break;
      case Scenario::TtcmLike:
        ttcm = gen_ttcm(spec.n_train, spec.rho, data_seed);
        break;
    }

    for (const auto& plan : plans) {
      ReplicateResult row;
      row.replicate = r;
      row.variant = plan.name;
      try {
        switch (spec.scenario) {
          case Scenario::Friedman1:
            friedman1_variant(spec, f1_train, f1_test, plan, base_cfg,
                              chain_seed, noise_seed, row);
            break;
          case Scenario::Friedman2:
            friedman2_variant(spec, f2_train, f2_test, plan, base_cfg,
                              chain_seed, row);
            break;
          case Scenario::TtcmLike:
            ttcm_variant(ttcm, plan, base_cfg, chain_seed, row);
            break;
        }
      } catch (const std::exception& e) {
        row.metrics.clear();
        row.error = e.what();
      }
      slots[r].push_back(std::move(row));
    }
  };

  if (threads <= 1) {
    for (int r = 0; r < replicates; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    const auto worker = [&] {
      while (true) {
        const int r = next.fetch_add(1);
        if (r >= replicates) break;
        run_one(r);
      }
    };
    std::vector<std::thread> pool;
    const int extra = std::min(threads, replicates) - 1;
    for (int t = 0; t < extra; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  std::vector<ReplicateResult> out;
  out.reserve(static_cast<std::size_t>(replicates) * plans.size());
  for (auto& slot : slots)
    for (auto& row : slot) out.push_back(std::move(row));
  return out;
}

std::vector<MetricSummary> summarize_metrics(
    const std::vector<ReplicateResult>& rows) {
  // Keys in first-appearance order keep the table deterministic.
  std::vector<std::pair<std::string, std::string>> keys;  // variant, base name
  const auto find_metric = [](const ReplicateResult& row,
                              const std::string& name, double& value) {
    for (const auto& m : row.metrics)
      if (m.first == name) {
        value = m.second;
        return true;
      }
    return false;
  };

  for (const auto& row : rows) {
    if (!row.error.empty()) continue;
    for (const auto& m : row.metrics) {
      std::string base = m.first;
      if (base.ends_with("_true") || base.ends_with("_lo") ||
          base.ends_with("_hi"))
        continue;
      if (base.ends_with("_est")) base = base.substr(0, base.size() - 4);
      const std::pair<std::string, std::string> key{row.variant, base};
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        keys.push_back(key);
    }
  }

  std::vector<MetricSummary> out;
  for (const auto& [variant, base] : keys) {
    MetricSummary s;
    s.variant = variant;
    s.name = base;
    std::vector<double> errors, values, covers, widths;
    for (const auto& row : rows) {
      if (row.variant != variant || !row.error.empty()) continue;
      double est = 0.0, truth = 0.0, lo = 0.0, hi = 0.0;
      if (find_metric(row, base + "_est", est) &&
          find_metric(row, base + "_true", truth)) {
        s.estimand = true;
        errors.push_back(est - truth);
        values.push_back(est);
        if (find_metric(row, base + "_lo", lo) &&
            find_metric(row, base + "_hi", hi)) {
          s.has_interval = true;
          covers.push_back(lo <= truth && truth <= hi ? 1.0 : 0.0);
          widths.push_back(hi - lo);
        }
      } else if (find_metric(row, base, est)) {
        values.push_back(est);
      }
    }
    const auto mean_of = [](const std::vector<double>& v) {
      double acc = 0.0;
      for (double x : v) acc += x;
      return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
    };
    s.replicates = static_cast<int>(values.size());
    if (s.replicates == 0) continue;
    s.mean = mean_of(values);
    if (s.estimand) {
      s.bias = mean_of(errors);
      double ss = 0.0, sq = 0.0;
      for (double e : errors) {
        ss += (e - s.bias) * (e - s.bias);
        sq += e * e;
      }
      const int r = static_cast<int>(errors.size());
      s.sd = r > 1 ? std::sqrt(ss / (r - 1)) : 0.0;
      s.rmse = std::sqrt(sq / r);
      if (s.has_interval) {
        s.ci_cover = mean_of(covers);
        s.ci_width = mean_of(widths);
      }
    } else {
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.sd = s.replicates > 1 ? std::sqrt(ss / (s.replicates - 1)) : 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace surt
