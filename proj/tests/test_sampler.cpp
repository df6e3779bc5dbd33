#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "support/stats_oracles.hpp"
#include "surt/data.hpp"
#include "surt/distributions.hpp"
#include "surt/linalg.hpp"
#include "surt/priors.hpp"
#include "surt/rng.hpp"
#include "surt/sampler.hpp"
#include "surt/errors.hpp"
#include "surt/trees.hpp"

using namespace surt;

namespace {

Dataset continuous_dataset(int n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.x_names = {"x0", "x1"};
  ds.x_kinds = {ColumnKind::Continuous, ColumnKind::Categorical};
  ds.x_levels = {0, 3};
  ds.x.assign(2, std::vector<double>(n));
  ds.y_names = {"y0", "y1"};
  ds.y.assign(2, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    ds.x[0][i] = rng.uniform();
    ds.x[1][i] = rng.uniform_int(3);
    const double f0 = std::sin(6.0 * ds.x[0][i]) + 0.5 * ds.x[1][i];
    const double f1 = 2.0 * ds.x[0][i] - 0.3 * ds.x[1][i];
    ds.y[0][i] = f0 + 0.3 * rng.normal();
    ds.y[1][i] = f1 + 0.5 * rng.normal();
  }
  return ds;
}

Dataset probit_dataset(int n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.x_names = {"x0", "x1"};
  ds.x_kinds = {ColumnKind::Continuous, ColumnKind::Continuous};
  ds.x_levels = {0, 0};
  ds.x.assign(2, std::vector<double>(n));
  ds.y_names = {"y0", "y1"};
  ds.y.assign(2, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    ds.x[0][i] = rng.uniform();
    ds.x[1][i] = rng.uniform();
    const double l0 = 1.5 * (ds.x[0][i] - 0.5) + 0.7 * rng.normal();
    const double l1 = -2.0 * (ds.x[1][i] - 0.4) + 0.7 * rng.normal();
    ds.y[0][i] = l0 > 0.0 ? 1.0 : 0.0;
    ds.y[1][i] = l1 > 0.0 ? 1.0 : 0.0;
  }
  return ds;
}

// Direct draw from the covariance prior: a_j ~ IG(1/2, 1/A_j^2), then
// Sigma ~ IW(nu + d - 1, 2 nu diag(1/a)).
Matrix prior_sigma_draw(Rng& rng, double nu,
                        const std::vector<double>& a_scale) {
  const int d = static_cast<int>(a_scale.size());
  Matrix s0 = Matrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    const double a =
        inv_gamma_sample(rng, 0.5, 1.0 / (a_scale[j] * a_scale[j]));
    s0(j, j) = 2.0 * nu / a;
  }
  return inv_wishart_sample(rng, nu + d - 1.0, s0);
}

double batch_means_se(const std::vector<double>& draws, int n_batches) {
  const int len = static_cast<int>(draws.size()) / n_batches;
  std::vector<double> means(n_batches, 0.0);
  for (int b = 0; b < n_batches; ++b) {
    for (int i = 0; i < len; ++i) means[b] += draws[b * len + i];
    means[b] /= len;
  }
  return std::sqrt(oracle::variance(means) / n_batches);
}

}  // namespace

TEST_CASE("full conditional parameters match hand-computed values") {
  const auto par = scale_aux_full_conditional(2.0, 2, 1.0, 1.0);
  CHECK(par.shape == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(par.scale == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(sigma_full_conditional_df(2.0, 2, 100) ==
        doctest::Approx(103.0).epsilon(1e-14));
  const auto par3 = scale_aux_full_conditional(3.0, 4, 0.5, 2.0);
  CHECK(par3.shape == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(par3.scale == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("correlation_from rescales an SPD matrix to unit diagonal") {
  Matrix w(2, 2);
  w << 4.0, 3.0, 3.0, 9.0;
  const Matrix c = correlation_from(w);
  CHECK(c(0, 0) == 1.0);
  CHECK(c(1, 1) == 1.0);
  CHECK(c(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(c(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("prior-only covariance Gibbs preserves the scale hierarchy") {
  const double nu = 2.0;
  const std::vector<double> a_scale = {1.0, 2.5};
  Rng rng(31001);
  std::vector<double> a = {1.0, 1.0};
  Matrix sigma = Matrix::Identity(2, 2);
  const Matrix zero = Matrix::Zero(2, 2);

  std::vector<double> sd0, sd1, rho;
  const int thin = 12, keep = 10000;
  for (int i = 0; i < 2000; ++i)
    update_scale_hierarchy(rng, nu, a_scale, zero, 0, a, sigma);
  for (int k = 0; k < keep; ++k) {
    for (int i = 0; i < thin; ++i)
      update_scale_hierarchy(rng, nu, a_scale, zero, 0, a, sigma);
    sd0.push_back(std::sqrt(sigma(0, 0)));
    sd1.push_back(std::sqrt(sigma(1, 1)));
    rho.push_back(sigma(0, 1) / std::sqrt(sigma(0, 0) * sigma(1, 1)));
  }

  CHECK(oracle::ks_one_sample(
            sd0, [&](double x) { return half_t_cdf(x, nu, a_scale[0]); }) <
        0.025);
  CHECK(oracle::ks_one_sample(
            sd1, [&](double x) { return half_t_cdf(x, nu, a_scale[1]); }) <
        0.025);
  // nu = 2 puts a flat prior on the correlation.
  CHECK(oracle::ks_one_sample(
            rho, [](double r) { return 0.5 * (r + 1.0); }) < 0.025);

  // Cross-check against independent draws from the prior itself.
  Rng rng2(31002);
  std::vector<double> sd0_direct;
  for (int k = 0; k < keep; ++k) {
    const Matrix s = prior_sigma_draw(rng2, nu, a_scale);
    sd0_direct.push_back(std::sqrt(s(0, 0)));
  }
  CHECK(oracle::ks_two_sample(sd0, sd0_direct) < 0.025);
}

TEST_CASE("prior-only expanded-scale MH preserves its prior") {
  const double nu = 2.0, nu_prop = 20.0;
  Rng rng(31003);
  Matrix w = Matrix::Identity(2, 2);
  const Matrix zero = Matrix::Zero(2, 2);

  std::vector<double> rho;
  long accepted = 0, proposed = 0;
  const int thin = 30, keep = 5000;
  for (int i = 0; i < 3000; ++i)
    px_correlation_step(rng, w, zero, 0, nu, nu_prop);
  for (int k = 0; k < keep; ++k) {
    for (int i = 0; i < thin; ++i) {
      ++proposed;
      if (px_correlation_step(rng, w, zero, 0, nu, nu_prop)) ++accepted;
    }
    rho.push_back(correlation_from(w)(0, 1));
  }
  CHECK(accepted > proposed / 10);
  CHECK(oracle::ks_one_sample(
            rho, [](double r) { return 0.5 * (r + 1.0); }) < 0.04);

  // Same law as the correlation of direct draws from IW(nu + d - 1, I).
  Rng rng2(31004);
  std::vector<double> rho_direct;
  const Matrix eye = Matrix::Identity(2, 2);
  for (int k = 0; k < keep; ++k)
    rho_direct.push_back(
        correlation_from(inv_wishart_sample(rng2, nu + 1.0, eye))(0, 1));
  CHECK(oracle::ks_two_sample(rho, rho_direct) < 0.04);
}

TEST_CASE("independence update keeps off-diagonals at zero") {
  Rng rng(31005);
  const std::vector<double> a_scale = {1.0, 2.0};
  const std::vector<double> ss = {12.0, 30.0};
  std::vector<double> a = {1.0, 1.0};
  Matrix sigma = Matrix::Identity(2, 2);
  sigma(0, 1) = sigma(1, 0) = 0.0;
  for (int i = 0; i < 200; ++i) {
    update_scale_independent(rng, 2.0, a_scale, ss, 10, a, sigma);
    CHECK(sigma(0, 1) == 0.0);
    CHECK(sigma(1, 0) == 0.0);
    CHECK(sigma(0, 0) > 0.0);
    CHECK(sigma(1, 1) > 0.0);
  }
}

TEST_CASE("d=1 independence update matches the d=1 hierarchy update") {
  // Both reduce to the same posterior over (a, sigma^2) given a fixed
  // residual sum of squares; the draws use different primitives, so the
  // check is distributional.
  const double nu = 2.0, ss = 8.5;
  const int n = 7, thin = 8, keep = 8000;
  const std::vector<double> a_scale = {1.3};

  Rng rng_h(31006);
  std::vector<double> a_h = {1.0};
  Matrix sig_h = Matrix::Identity(1, 1);
  Matrix cross(1, 1);
  cross << ss;
  std::vector<double> draws_h;
  for (int k = 0; k < keep; ++k) {
    for (int i = 0; i < thin; ++i)
      update_scale_hierarchy(rng_h, nu, a_scale, cross, n, a_h, sig_h);
    draws_h.push_back(sig_h(0, 0));
  }

  Rng rng_i(31007);
  std::vector<double> a_i = {1.0};
  Matrix sig_i = Matrix::Identity(1, 1);
  std::vector<double> draws_i;
  for (int k = 0; k < keep; ++k) {
    for (int i = 0; i < thin; ++i)
      update_scale_independent(rng_i, nu, a_scale, {ss}, n, a_i, sig_i);
    draws_i.push_back(sig_i(0, 0));
  }

  CHECK(oracle::ks_two_sample(draws_h, draws_i) < 0.03);
}

TEST_CASE("joint transition preserves the prior") {
  // Successive-conditional check: alternate one sampler sweep with a redraw
  // of the outcomes from the current fit and covariance. The stationary
  // marginals of the covariance are then its prior.
  const int n = 20;
  Dataset ds;
  ds.x_names = {"x0"};
  ds.x_kinds = {ColumnKind::Continuous};
  ds.x_levels = {0};
  ds.x.assign(1, std::vector<double>(n));
  for (int i = 0; i < n; ++i) ds.x[0][i] = i / (n - 1.0) - 0.5;
  ds.y_names = {"y0", "y1"};
  ds.y.assign(2, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    ds.y[0][i] = ds.x[0][i];
    ds.y[1][i] = -ds.x[0][i];
  }

  ModelConfig cfg;
  cfg.mode = Mode::Continuous;
  cfg.mode_declared = true;
  cfg.m = 5;
  cfg.nu = 2.0;
  cfg.n_mcmc = 1;
  cfg.n_burnin = 0;

  CalibratedPriors pri;
  pri.sigma_hat = {0.3, 0.3};
  pri.a_scale = {0.2, 0.2};
  pri.leaf_sd = 0.15;

  ContinuousSampler s(ds, cfg, pri, 31008);
  Rng data_rng(31009);

  const auto redraw_outcomes = [&]() {
    const Matrix f = s.fitted();
    const Matrix chol = chol_spd(s.sigma());
    const Vector zero_mean = Vector::Zero(2);
    Matrix y(n, 2);
    for (int i = 0; i < n; ++i) {
      const Vector eps = mvn_sample(data_rng, zero_mean, chol);
      y(i, 0) = f(i, 0) + eps(0);
      y(i, 1) = f(i, 1) + eps(1);
    }
    s.replace_scaled_outcomes(y);
  };

  for (int i = 0; i < 2000; ++i) {
    s.step();
    redraw_outcomes();
  }
  std::vector<double> sd0, sd1, rho;
  const int thin = 20, keep = 4000;
  for (int k = 0; k < keep; ++k) {
    for (int i = 0; i < thin; ++i) {
      s.step();
      redraw_outcomes();
    }
    const Matrix& sig = s.sigma();
    sd0.push_back(std::sqrt(sig(0, 0)));
    sd1.push_back(std::sqrt(sig(1, 1)));
    rho.push_back(sig(0, 1) / std::sqrt(sig(0, 0) * sig(1, 1)));
  }

  CHECK(oracle::ks_one_sample(
            sd0, [&](double x) { return half_t_cdf(x, 2.0, 0.2); }) < 0.045);
  CHECK(oracle::ks_one_sample(
            sd1, [&](double x) { return half_t_cdf(x, 2.0, 0.2); }) < 0.045);
  CHECK(oracle::ks_one_sample(
            rho, [](double r) { return 0.5 * (r + 1.0); }) < 0.045);

  const auto& mv = s.moves();
  CHECK(mv.proposed[0] > 0);
  CHECK(mv.accepted[0] > 0);
  CHECK(mv.accepted[1] > 0);
  CHECK(mv.accepted[2] > 0);
}

TEST_CASE("probit latents respect the outcome signs") {
  const Dataset ds = probit_dataset(60, 31010);
  ModelConfig cfg;
  cfg.m = 10;
  cfg.n_mcmc = 40;
  cfg.n_burnin = 10;
  cfg.resolve(Mode::Probit, ds.n(), ds.d());

  const CalibratedPriors pri = calibrate_priors(ds, cfg, nullptr);
  ProbitSampler s(ds, cfg, pri, 31011);
  for (int i = 0; i < 40; ++i) s.step();

  const Matrix& z = s.latent();
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < ds.n(); ++i) {
      if (ds.y[j][i] == 1.0)
        CHECK(z(i, j) > 0.0);
      else
        CHECK(z(i, j) <= 0.0);
    }
  // Expanded-scale moves were attempted and the state stays a correlation.
  CHECK(s.px_proposed() == 40);
  CHECK(s.px_accepted() > 0);
  CHECK(s.sigma()(0, 0) == 1.0);
  CHECK(s.sigma()(1, 1) == 1.0);
  CHECK(std::fabs(s.sigma()(0, 1)) < 1.0);
}

TEST_CASE("probit independence skips the correlation move") {
  const Dataset ds = probit_dataset(40, 31012);
  ModelConfig cfg;
  cfg.m = 5;
  cfg.independence = true;
  cfg.n_mcmc = 20;
  cfg.n_burnin = 5;
  cfg.resolve(Mode::Probit, ds.n(), ds.d());

  const CalibratedPriors pri = calibrate_priors(ds, cfg, nullptr);
  ProbitSampler s(ds, cfg, pri, 31013);
  for (int i = 0; i < 20; ++i) s.step();
  CHECK(s.px_proposed() == 0);
  CHECK(s.sigma() == Matrix::Identity(2, 2));
}

TEST_CASE("run_chain returns coherent shapes and is deterministic") {
  const Dataset ds = continuous_dataset(25, 31014);
  ModelConfig cfg;
  cfg.m = 8;
  cfg.n_mcmc = 50;
  cfg.n_burnin = 20;

  std::vector<EvalDesignSpec> designs(1);
  designs[0].name = "test";
  designs[0].x.assign(2, std::vector<double>(7));
  Rng rng(31015);
  for (int i = 0; i < 7; ++i) {
    designs[0].x[0][i] = rng.uniform();
    designs[0].x[1][i] = rng.uniform_int(3);
  }

  const ChainResult res = run_chain(ds, cfg, designs, 31016);

  CHECK(res.config.n_mcmc == 50);
  CHECK(res.config.mode == Mode::Continuous);
  CHECK(res.design_names == std::vector<std::string>{"train", "test"});
  CHECK(res.sigma_all.size() == 50);
  CHECK(res.sigma_retained.size() == 30);
  REQUIRE(res.fits.size() == 2);
  REQUIRE(res.fits[0].size() == 30);
  REQUIRE(res.fits[1].size() == 30);
  CHECK(res.fits[0][0].rows() == 25);
  CHECK(res.fits[0][0].cols() == 2);
  CHECK(res.fits[1][0].rows() == 7);
  CHECK(res.fits[1][0].cols() == 2);
  REQUIRE(res.forests.size() == 30);
  REQUIRE(res.forests[0].size() == 2);

  // Importance shares per outcome sum to one once trees have split.
  for (int j = 0; j < 2; ++j) {
    const double total = res.importance.row(j).sum();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  // One proposal per tree per outcome per sweep.
  const long total_moves =
      res.moves.proposed[0] + res.moves.proposed[1] + res.moves.proposed[2];
  CHECK(total_moves == 50L * 8L * 2L);

  // The serialized forest reproduces the stored prediction fit exactly.
  for (std::size_t k : {std::size_t{0}, std::size_t{14}, std::size_t{29}}) {
    for (int j = 0; j < 2; ++j) {
      const auto& blob = res.forests[k][j];
      std::size_t off = 0;
      std::vector<Tree> trees;
      for (int t = 0; t < 8; ++t)
        trees.push_back(Tree::deserialize(blob, off));
      CHECK(off == blob.size());
      for (int r = 0; r < 7; ++r) {
        double sum = 0.0;
        for (const Tree& t : trees) sum += t.evaluate(designs[0].x, r);
        CHECK(std::fabs(sum - res.fits[1][k](r, j)) < 1e-12);
      }
      // Train fits come from incrementally maintained residuals; fresh
      // evaluation must agree to rounding.
      for (int r = 0; r < ds.n(); ++r) {
        double sum = 0.0;
        for (const Tree& t : trees) sum += t.evaluate(ds.x, r);
        CHECK(std::fabs(sum - res.fits[0][k](r, j)) < 1e-9);
      }
    }
  }

  // Same seed, same everything.
  const ChainResult res2 = run_chain(ds, cfg, designs, 31016);
  REQUIRE(res2.sigma_retained.size() == res.sigma_retained.size());
  for (std::size_t k = 0; k < res.sigma_retained.size(); ++k) {
    CHECK(res.sigma_retained[k] == res2.sigma_retained[k]);
    CHECK(res.fits[0][k] == res2.fits[0][k]);
    CHECK(res.fits[1][k] == res2.fits[1][k]);
    CHECK(res.forests[k] == res2.forests[k]);
  }

  // Forest storage is optional.
  ModelConfig cfg_slim = cfg;
  cfg_slim.store_forests = false;
  const ChainResult res3 = run_chain(ds, cfg_slim, designs, 31016);
  CHECK(res3.forests.empty());
  CHECK(res3.sigma_retained.size() == 30);
}

TEST_CASE("run_chain in probit mode stores latents on request") {
  const Dataset ds = probit_dataset(30, 31017);
  ModelConfig cfg;
  cfg.m = 5;
  cfg.n_mcmc = 30;
  cfg.n_burnin = 10;
  cfg.store_forests = false;
  cfg.store_latents = true;

  const ChainResult res = run_chain(ds, cfg, {}, 31018);
  CHECK(res.config.mode == Mode::Probit);
  CHECK(res.px_proposed == 30);
  CHECK(res.px_accepted >= 0);
  REQUIRE(res.latents.size() == 20);
  CHECK(res.latents[0].rows() == 30);
  CHECK(res.latents[0].cols() == 2);
  for (const Matrix& z : res.latents)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 30; ++i) {
        if (ds.y[j][i] == 1.0)
          CHECK(z(i, j) > 0.0);
        else
          CHECK(z(i, j) <= 0.0);
      }
  // Correlation draws have unit diagonal.
  for (const Matrix& sig : res.sigma_retained) {
    CHECK(sig(0, 0) == 1.0);
    CHECK(sig(1, 1) == 1.0);
  }
}

TEST_CASE("run_chains derives distinct per-chain streams") {
  const Dataset ds = continuous_dataset(20, 31019);
  ModelConfig cfg;
  cfg.m = 4;
  cfg.n_mcmc = 12;
  cfg.n_burnin = 4;
  cfg.n_chains = 2;
  cfg.store_forests = false;

  const auto chains = run_chains(ds, cfg, {});
  REQUIRE(chains.size() == 2);
  const ChainResult direct =
      run_chain(ds, cfg, {}, splitmix64(cfg.seed ^ splitmix64(5000)));
  REQUIRE(chains[0].sigma_retained.size() == direct.sigma_retained.size());
  for (std::size_t k = 0; k < direct.sigma_retained.size(); ++k)
    CHECK(chains[0].sigma_retained[k] == direct.sigma_retained[k]);
  CHECK(chains[0].sigma_retained[0] != chains[1].sigma_retained[0]);
}

TEST_CASE("d=1 hierarchy and independence modes agree on the posterior") {
  Rng gen(31020);
  const int n = 40;
  Dataset ds;
  ds.x_names = {"x0"};
  ds.x_kinds = {ColumnKind::Continuous};
  ds.x_levels = {0};
  ds.x.assign(1, std::vector<double>(n));
  ds.y_names = {"y0"};
  ds.y.assign(1, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    ds.x[0][i] = gen.uniform();
    ds.y[0][i] = std::sin(6.0 * ds.x[0][i]) + 0.3 * gen.normal();
  }

  ModelConfig cfg;
  cfg.m = 10;
  cfg.n_mcmc = 900;
  cfg.n_burnin = 300;
  cfg.store_forests = false;

  ModelConfig cfg_ind = cfg;
  cfg_ind.independence = true;

  const ChainResult res_h = run_chain(ds, cfg, {}, 31021);
  const ChainResult res_i = run_chain(ds, cfg_ind, {}, 31022);

  std::vector<double> var_h, var_i;
  for (const Matrix& s : res_h.sigma_retained) var_h.push_back(s(0, 0));
  for (const Matrix& s : res_i.sigma_retained) var_i.push_back(s(0, 0));

  const double mh = oracle::mean(var_h), mi = oracle::mean(var_i);
  const double se =
      std::sqrt(std::pow(batch_means_se(var_h, 20), 2) +
                std::pow(batch_means_se(var_i, 20), 2));
  CHECK(std::fabs(mh - mi) < 3.0 * se);
}

TEST_CASE("registering designs after sampling starts is rejected") {
  const Dataset ds = continuous_dataset(15, 31023);
  ModelConfig cfg;
  cfg.m = 3;
  cfg.resolve(Mode::Continuous, ds.n(), ds.d());
  const OutcomeScaler scaler = OutcomeScaler::fit(ds.y);
  const CalibratedPriors pri = calibrate_priors(ds, cfg, &scaler);
  ContinuousSampler s(ds, cfg, pri, 31024);
  s.step();
  std::vector<std::vector<double>> x(2, std::vector<double>(3, 0.25));
  CHECK_THROWS_AS(s.add_design(x), Error);
}
