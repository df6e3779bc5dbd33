#include "surt/priors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "surt/errors.hpp"
#include "surt/linalg.hpp"
#include "surt/rng.hpp"
#include "surt/special.hpp"

namespace surt {

double tree_split_probability(int depth, double alpha, double beta) {
  if (depth < 0) fail(ErrorCode::InvalidArgument, "tree depth must be >= 0");
  if (alpha <= 0.0 || alpha >= 1.0)
    fail(ErrorCode::InvalidArgument, "split prior base must lie in (0, 1)");
  return alpha * std::pow(1.0 + depth, -beta);
}

double leaf_prior_sd_continuous(int m, double kappa) {
  if (m < 1) fail(ErrorCode::InvalidArgument, "tree count must be >= 1");
  if (kappa <= 0.0) fail(ErrorCode::InvalidArgument, "kappa must be > 0");
  return 1.0 / (2.0 * kappa * std::sqrt(static_cast<double>(m)));
}

double leaf_prior_sd_probit(int m, double kappa, double q_z) {
  if (m < 1) fail(ErrorCode::InvalidArgument, "tree count must be >= 1");
  if (kappa <= 0.0) fail(ErrorCode::InvalidArgument, "kappa must be > 0");
  if (q_z <= 0.0) fail(ErrorCode::InvalidArgument, "latent range must be > 0");
  return q_z / (kappa * std::sqrt(static_cast<double>(m)));
}

double half_t_cdf(double x, double nu, double a_scale) {
  if (nu <= 0.0) fail(ErrorCode::InvalidDf, "half-t df must be > 0");
  if (a_scale <= 0.0)
    fail(ErrorCode::InvalidArgument, "half-t scale must be > 0");
  if (x <= 0.0) return 0.0;
  const double r = x / a_scale;
  if (nu == 2.0) return r / std::sqrt(2.0 + r * r);
  const double z = nu / (nu + r * r);
  return 1.0 - ibeta_reg(0.5 * nu, 0.5, z);
}

double calibrate_half_t_scale(double sigma_hat, double nu, double alpha_sigma) {
  if (sigma_hat <= 0.0)
    fail(ErrorCode::InvalidArgument, "sigma estimate must be > 0");
  if (nu <= 0.0) fail(ErrorCode::InvalidDf, "half-t df must be > 0");
  if (alpha_sigma <= 0.0 || alpha_sigma >= 1.0)
    fail(ErrorCode::InvalidArgument, "tail mass must lie in (0, 1)");

  // half_t_cdf(sigma_hat, nu, a) is strictly decreasing in a.
  double lo = sigma_hat;
  double hi = sigma_hat;
  int guard = 0;
  while (half_t_cdf(sigma_hat, nu, lo) <= alpha_sigma) {
    lo *= 0.25;
    if (++guard > 600 || lo <= 0.0)
      fail(ErrorCode::CalibrationBracketFailure,
           "no lower bracket for half-t scale");
  }
  guard = 0;
  while (half_t_cdf(sigma_hat, nu, hi) >= alpha_sigma) {
    hi *= 4.0;
    if (++guard > 600 || !std::isfinite(hi))
      fail(ErrorCode::CalibrationBracketFailure,
           "no upper bracket for half-t scale");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 1e-10 * mid) return mid;
    if (half_t_cdf(sigma_hat, nu, mid) > alpha_sigma) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

// Dummy-encodes the covariates: continuous columns unchanged, a categorical
// column with L levels as L-1 indicators (first level is the reference).
Matrix encode_covariates(const Dataset& ds) {
  const int n = ds.n();
  int p_enc = 0;
  for (int k = 0; k < ds.p(); ++k) {
    p_enc += ds.x_kinds[k] == ColumnKind::Categorical ? ds.x_levels[k] - 1 : 1;
  }
  Matrix x(n, p_enc);
  int col = 0;
  for (int k = 0; k < ds.p(); ++k) {
    if (ds.x_kinds[k] == ColumnKind::Categorical) {
      for (int lv = 1; lv < ds.x_levels[k]; ++lv) {
        for (int i = 0; i < n; ++i)
          x(i, col) = ds.x[k][i] == static_cast<double>(lv) ? 1.0 : 0.0;
        ++col;
      }
    } else {
      for (int i = 0; i < n; ++i) x(i, col) = ds.x[k][i];
      ++col;
    }
  }
  return x;
}

double ols_residual_sd(const Matrix& x_enc, const std::vector<double>& y) {
  const int n = static_cast<int>(x_enc.rows());
  Matrix design(n, x_enc.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x_enc.cols()) = x_enc;
  Eigen::Map<const Vector> yv(y.data(), n);
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  const Vector beta = qr.solve(yv);
  const double rss = (yv - design * beta).squaredNorm();
  const int df = n - static_cast<int>(qr.rank());
  if (df <= 0)
    fail(ErrorCode::DegenerateDesign, "no residual degrees of freedom");
  return std::sqrt(rss / df);
}

struct Standardized {
  Matrix x;            // centered and scaled columns; zero-variance left at 0
  Vector mean;
  Vector sd;           // 0 marks an excluded column
  Vector y_centered;
  double y_mean = 0.0;
};

Standardized standardize(const Matrix& x, const Vector& y,
                         const std::vector<int>& rows) {
  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(x.cols());
  Standardized s;
  s.x.resize(n, p);
  s.mean.resize(p);
  s.sd.resize(p);
  for (int j = 0; j < p; ++j) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += x(rows[i], j);
    mu /= n;
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = x(rows[i], j) - mu;
      v += c * c;
    }
    const double sd = std::sqrt(v / n);
    s.mean[j] = mu;
    s.sd[j] = sd;
    if (sd > 0.0) {
      for (int i = 0; i < n; ++i) s.x(i, j) = (x(rows[i], j) - mu) / sd;
    } else {
      s.x.col(j).setZero();
    }
  }
  double ym = 0.0;
  for (int i = 0; i < n; ++i) ym += y[rows[i]];
  ym /= n;
  s.y_mean = ym;
  s.y_centered.resize(n);
  for (int i = 0; i < n; ++i) s.y_centered[i] = y[rows[i]] - ym;
  return s;
}

// Coordinate descent for (1/2n)||y - X b||^2 + lambda ||b||_1 on standardized
// columns (unit 1/n variance, so each coordinate update is a plain soft
// threshold). Warm-started from the supplied beta.
void lasso_fit(const Matrix& x, const Vector& y, double lambda, Vector& beta) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  Vector r = y - x * beta;
  for (int sweep = 0; sweep < 1000; ++sweep) {
    double max_delta = 0.0;
    for (int j = 0; j < p; ++j) {
      if (x.col(j).isZero(0.0)) continue;
      const double z = beta[j] + x.col(j).dot(r) / n;
      const double bj =
          std::copysign(std::max(std::abs(z) - lambda, 0.0), z);
      const double delta = bj - beta[j];
      if (delta != 0.0) {
        r -= delta * x.col(j);
        beta[j] = bj;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < 1e-7) break;
  }
}

double lasso_residual_sd(const Matrix& x_enc, const std::vector<double>& y,
                         std::uint64_t seed) {
  const int n = static_cast<int>(x_enc.rows());
  const int p = static_cast<int>(x_enc.cols());
  Eigen::Map<const Vector> yv(y.data(), n);

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const Standardized full = standardize(x_enc, yv, all);

  double lambda_max = 0.0;
  for (int j = 0; j < p; ++j)
    lambda_max =
        std::max(lambda_max, std::abs(full.x.col(j).dot(full.y_centered)) / n);
  if (lambda_max <= 0.0)
    fail(ErrorCode::DegenerateDesign, "all encoded columns are constant");

  const int n_lambda = 50;
  std::vector<double> grid(n_lambda);
  for (int g = 0; g < n_lambda; ++g)
    grid[g] = lambda_max * std::pow(1e-3, g / double(n_lambda - 1));

  // Deterministic 5-fold split: shuffle row indices, assign round robin.
  Rng rng(seed);
  std::vector<int> perm(all);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  const int n_folds = std::min(5, n);
  std::vector<std::vector<int>> folds(n_folds);
  for (int i = 0; i < n; ++i) folds[i % n_folds].push_back(perm[i]);

  std::vector<double> cv_err(n_lambda, 0.0);
  for (int f = 0; f < n_folds; ++f) {
    std::vector<int> train;
    train.reserve(n);
    for (int g = 0; g < n_folds; ++g)
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    if (train.empty()) continue;
    const Standardized st = standardize(x_enc, yv, train);
    Vector beta = Vector::Zero(p);
    for (int g = 0; g < n_lambda; ++g) {
      lasso_fit(st.x, st.y_centered, grid[g], beta);
      double err = 0.0;
      for (int row : folds[f]) {
        double pred = st.y_mean;
        for (int j = 0; j < p; ++j)
          if (st.sd[j] > 0.0)
            pred += beta[j] * (x_enc(row, j) - st.mean[j]) / st.sd[j];
        const double e = y[row] - pred;
        err += e * e;
      }
      cv_err[g] += err;
    }
  }
  int best = 0;
  for (int g = 1; g < n_lambda; ++g)
    if (cv_err[g] < cv_err[best]) best = g;

  Vector beta = Vector::Zero(p);
  for (int g = 0; g <= best; ++g) lasso_fit(full.x, full.y_centered, grid[g], beta);
  const double rss = (full.y_centered - full.x * beta).squaredNorm();
  return std::sqrt(rss / n);
}

}  // namespace

SigmaHatResult estimate_sigma_hat(const Dataset& ds,
                                  const std::vector<double>& y,
                                  std::uint64_t seed) {
  if (static_cast<int>(y.size()) != ds.n())
    fail(ErrorCode::InvalidArgument, "outcome length does not match rows");
  const Matrix x_enc = encode_covariates(ds);
  SigmaHatResult out;
  out.used_lasso = ds.n() <= static_cast<int>(x_enc.cols()) + 1;
  out.sigma_hat = out.used_lasso ? lasso_residual_sd(x_enc, y, seed)
                                 : ols_residual_sd(x_enc, y);
  if (!(out.sigma_hat > 0.0) || !std::isfinite(out.sigma_hat))
    fail(ErrorCode::DegenerateDesign,
         "pilot fit left no residual variation");
  return out;
}

CalibratedPriors calibrate_priors(const Dataset& ds, const ModelConfig& cfg,
                                  const OutcomeScaler* scaler) {
  CalibratedPriors out;
  if (cfg.mode == Mode::Probit) {
    out.leaf_sd = leaf_prior_sd_probit(cfg.m, cfg.kappa, cfg.q_z);
    return out;
  }
  if (scaler == nullptr)
    fail(ErrorCode::InvalidArgument,
         "continuous calibration needs the outcome scaler");
  out.leaf_sd = leaf_prior_sd_continuous(cfg.m, cfg.kappa);
  out.sigma_hat.resize(ds.d());
  out.sigma_hat_lasso.resize(ds.d());
  out.a_scale.resize(ds.d());
  for (int j = 0; j < ds.d(); ++j) {
    const std::vector<double> ys = scaler->scale_column(j, ds.y[j]);
    const std::uint64_t seed_j = splitmix64(cfg.seed ^ splitmix64(9100 + j));
    const SigmaHatResult r = estimate_sigma_hat(ds, ys, seed_j);
    out.sigma_hat[j] = r.sigma_hat;
    out.sigma_hat_lasso[j] = r.used_lasso ? 1.0 : 0.0;
    out.a_scale[j] = calibrate_half_t_scale(r.sigma_hat, cfg.nu, cfg.alpha_sigma);
  }
  return out;
}

}  // namespace surt
