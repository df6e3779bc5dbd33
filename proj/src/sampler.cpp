#include "surt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "surt/distributions.hpp"
#include "surt/errors.hpp"
#include "surt/kernels.hpp"

namespace surt {

InvGammaParams scale_aux_full_conditional(double nu, int d, double a_scale_j,
                                          double sigma_inv_jj) {
  InvGammaParams out;
  out.shape = 0.5 * (nu + d);
  out.scale = 1.0 / (a_scale_j * a_scale_j) + nu * sigma_inv_jj;
  return out;
}

double sigma_full_conditional_df(double nu, int d, int n) {
  return nu + d - 1.0 + n;
}

void update_scale_hierarchy(Rng& rng, double nu,
                            const std::vector<double>& a_scale,
                            const Matrix& resid_crossprod, int n,
                            std::vector<double>& a, Matrix& sigma) {
  const int d = static_cast<int>(sigma.rows());
  const Matrix sigma_inv = spd_inverse(sigma);
  for (int j = 0; j < d; ++j) {
    const auto par =
        scale_aux_full_conditional(nu, d, a_scale[j], sigma_inv(j, j));
    a[j] = inv_gamma_sample(rng, par.shape, par.scale);
  }
  Matrix scale = resid_crossprod;
  for (int j = 0; j < d; ++j) scale(j, j) += 2.0 * nu / a[j];
  sigma = inv_wishart_sample(rng, sigma_full_conditional_df(nu, d, n), scale);
}

void update_scale_independent(Rng& rng, double nu,
                              const std::vector<double>& a_scale,
                              const std::vector<double>& resid_sumsq, int n,
                              std::vector<double>& a, Matrix& sigma) {
  const int d = static_cast<int>(a_scale.size());
  for (int j = 0; j < d; ++j) {
    a[j] = inv_gamma_sample(
        rng, 0.5 * (nu + 1.0),
        1.0 / (a_scale[j] * a_scale[j]) + nu / sigma(j, j));
  }
  for (int j = 0; j < d; ++j) {
    sigma(j, j) = inv_gamma_sample(rng, 0.5 * (nu + n),
                                   nu / a[j] + 0.5 * resid_sumsq[j]);
  }
}

Matrix correlation_from(const Matrix& w) {
  const int d = static_cast<int>(w.rows());
  Matrix c(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      c(i, j) = w(i, j) / std::sqrt(w(i, i) * w(j, j));
    c(i, i) = 1.0;
  }
  return c;
}

bool px_correlation_step(Rng& rng, Matrix& w, const Matrix& resid_crossprod,
                         int n, double nu, double nu_prop) {
  const int d = static_cast<int>(w.rows());
  const Matrix w_star = inv_wishart_sample(rng, nu_prop, nu_prop * w);
  const Matrix eye = Matrix::Identity(d, d);
  // The likelihood depends on w only through its correlation; row count and
  // crossprod are sufficient. Constant terms cancel in the ratio.
  const auto loglik = [&](const Matrix& ww) {
    const Matrix corr = correlation_from(ww);
    const Matrix chol = chol_spd(corr);
    const Matrix inv = spd_inverse(corr);
    return -0.5 * n * logdet_from_chol(chol) -
           0.5 * inv.cwiseProduct(resid_crossprod).sum();
  };
  double log_alpha = inv_wishart_logpdf(w_star, nu + d - 1.0, eye) -
                     inv_wishart_logpdf(w, nu + d - 1.0, eye) +
                     inv_wishart_logpdf(w, nu_prop, nu_prop * w_star) -
                     inv_wishart_logpdf(w_star, nu_prop, nu_prop * w);
  if (n > 0) log_alpha += loglik(w_star) - loglik(w);
  if (std::log(rng.uniform_pos()) < log_alpha) {
    w = w_star;
    return true;
  }
  return false;
}

namespace {

TreeMovePrior move_prior_from(const ModelConfig& cfg,
                              const CalibratedPriors& priors) {
  TreeMovePrior mp;
  mp.alpha = cfg.alpha;
  mp.beta = cfg.beta;
  mp.leaf_sd = priors.leaf_sd;
  mp.p_grow = cfg.p_grow;
  mp.p_prune = cfg.p_prune;
  mp.p_change = cfg.p_change;
  return mp;
}

// One sweep over an outcome's trees: peel the tree's fit off the residual,
// take one structure move and a full leaf redraw against c = r - u, then fold
// the new fit back in.
void sweep_trees(std::vector<Tree>& trees,
                 std::vector<std::vector<int>>& assigns,
                 std::vector<double>& resid, const Dataset& ds,
                 const std::vector<double>* u, double v,
                 const TreeMovePrior& mp, Rng& rng, MoveStats& moves,
                 std::vector<std::vector<std::vector<int>>*> eval_assigns,
                 const std::vector<std::vector<std::vector<double>>>& eval_x) {
  const auto& ops = kernels::active();
  const std::size_t n = resid.size();
  const double smu2 = mp.leaf_sd * mp.leaf_sd;
  std::vector<double> mu_buf, r(n), cbuf(n);
  std::vector<FollowerDesign> followers;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    Tree& tree = trees[t];
    auto& assign = assigns[t];
    tree.copy_mu(mu_buf);
    ops.gather_add(r.data(), resid.data(), mu_buf.data(), assign.data(), n);
    const std::vector<double>* c = &r;
    if (u != nullptr) {
      ops.sub(cbuf.data(), r.data(), u->data(), n);
      c = &cbuf;
    }
    followers.clear();
    for (std::size_t e = 0; e < eval_x.size(); ++e)
      followers.push_back({&eval_x[e], &(*eval_assigns[e])[t]});
    const auto res = propose_tree_move(tree, ds.x, ds.x_kinds, assign, *c, v,
                                       mp, rng, followers);
    ++moves.proposed[static_cast<int>(res.type)];
    if (res.accepted) ++moves.accepted[static_cast<int>(res.type)];
    redraw_leaf_values(tree, assign, *c, v, smu2, rng);
    tree.copy_mu(mu_buf);
    ops.gather_sub(resid.data(), r.data(), mu_buf.data(), assign.data(), n);
  }
}

Matrix residual_crossprod(const std::vector<std::vector<double>>& resid) {
  const auto& ops = kernels::active();
  const int d = static_cast<int>(resid.size());
  const std::size_t n = resid[0].size();
  Matrix s(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      s(j, k) = ops.dot(resid[j].data(), resid[k].data(), n);
      s(k, j) = s(j, k);
    }
  return s;
}

Matrix design_fit_impl(
    const std::vector<std::vector<Tree>>& forest,
    const std::vector<std::vector<std::vector<int>>>& assigns, int rows) {
  const auto& ops = kernels::active();
  const int d = static_cast<int>(forest.size());
  Matrix out = Matrix::Zero(rows, d);
  std::vector<double> col(rows), mu_buf;
  for (int j = 0; j < d; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t t = 0; t < forest[j].size(); ++t) {
      forest[j][t].copy_mu(mu_buf);
      ops.gather_add(col.data(), col.data(), mu_buf.data(),
                     assigns[j][t].data(), rows);
    }
    for (int i = 0; i < rows; ++i) out(i, j) = col[i];
  }
  return out;
}

void check_resolved(const ModelConfig& cfg, const CalibratedPriors& priors,
                    int d, bool continuous) {
  if (cfg.n_mcmc < 0 || cfg.n_burnin < 0)
    fail(ErrorCode::InvalidConfig, "config must be resolved before sampling");
  if (continuous && static_cast<int>(priors.sigma_hat.size()) != d)
    fail(ErrorCode::InvalidConfig, "calibration does not match outcomes");
  if (priors.leaf_sd <= 0.0)
    fail(ErrorCode::InvalidConfig, "leaf prior sd must be positive");
}

std::vector<double> importance_shares_impl(const std::vector<Tree>& trees,
                                           int p) {
  std::vector<int> counts(p, 0);
  for (const Tree& t : trees) t.count_splits(counts);
  long total = 0;
  for (int c : counts) total += c;
  std::vector<double> shares(p, 0.0);
  if (total > 0)
    for (int k = 0; k < p; ++k) shares[k] = counts[k] / double(total);
  return shares;
}

int design_rows(const std::vector<std::vector<double>>& x, int p) {
  if (static_cast<int>(x.size()) != p)
    fail(ErrorCode::InvalidArgument, "design covariate count mismatch");
  return x.empty() ? 0 : static_cast<int>(x[0].size());
}

}  // namespace

ContinuousSampler::ContinuousSampler(const Dataset& ds, const ModelConfig& cfg,
                                     const CalibratedPriors& priors,
                                     std::uint64_t seed)
    : ds_(ds), cfg_(cfg), priors_(priors), rng_(seed), n_(ds.n()), d_(ds.d()) {
  check_resolved(cfg_, priors_, d_, true);
  const OutcomeScaler scaler = OutcomeScaler::fit(ds.y);
  y_.resize(n_, d_);
  for (int j = 0; j < d_; ++j)
    for (int i = 0; i < n_; ++i) y_(i, j) = scaler.scale(j, ds.y[j][i]);
  forest_.assign(d_, std::vector<Tree>(cfg_.m));
  assign_.assign(d_, std::vector<std::vector<int>>(
                         cfg_.m, std::vector<int>(n_, 0)));
  resid_.assign(d_, std::vector<double>(n_));
  for (int j = 0; j < d_; ++j)
    for (int i = 0; i < n_; ++i) resid_[j][i] = y_(i, j);
  a_.resize(d_);
  sigma_ = Matrix::Zero(d_, d_);
  for (int j = 0; j < d_; ++j) {
    a_[j] = priors_.a_scale[j] * priors_.a_scale[j];
    sigma_(j, j) = priors_.sigma_hat[j] * priors_.sigma_hat[j];
  }
}

int ContinuousSampler::add_design(const std::vector<std::vector<double>>& x) {
  if (stepped_)
    fail(ErrorCode::InvalidArgument,
         "prediction designs must be registered before sampling");
  const int rows = design_rows(x, ds_.p());
  eval_x_.push_back(x);
  eval_assign_.push_back(std::vector<std::vector<std::vector<int>>>(
      d_, std::vector<std::vector<int>>(cfg_.m, std::vector<int>(rows, 0))));
  return static_cast<int>(eval_x_.size()) - 1;
}

void ContinuousSampler::tree_pass(int j, const std::vector<double>& u,
                                  double v) {
  const TreeMovePrior mp = move_prior_from(cfg_, priors_);
  std::vector<std::vector<std::vector<int>>*> eval_ptrs;
  for (auto& ea : eval_assign_) eval_ptrs.push_back(&ea[j]);
  const bool offsets = d_ > 1 && !cfg_.independence && !zero_offsets_;
  sweep_trees(forest_[j], assign_[j], resid_[j], ds_, offsets ? &u : nullptr,
              v, mp, rng_, moves_, eval_ptrs, eval_x_);
}

void ContinuousSampler::step() {
  stepped_ = true;
  const auto& ops = kernels::active();
  for (int j = 0; j < d_; ++j) {
    std::vector<double> u(n_, 0.0);
    double v = sigma_(j, j);
    if (d_ > 1 && !cfg_.independence && !zero_offsets_) {
      const auto par = conditional_normal_params(sigma_, j);
      v = par.variance;
      int idx = 0;
      for (int k = 0; k < d_; ++k) {
        if (k == j) continue;
        ops.axpy(u.data(), par.weights[idx], resid_[k].data(), n_);
        ++idx;
      }
    }
    tree_pass(j, u, v);
  }
  if (cfg_.independence) {
    std::vector<double> ss(d_);
    for (int j = 0; j < d_; ++j)
      ss[j] = ops.dot(resid_[j].data(), resid_[j].data(), n_);
    update_scale_independent(rng_, cfg_.nu, priors_.a_scale, ss, n_, a_,
                             sigma_);
  } else {
    update_scale_hierarchy(rng_, cfg_.nu, priors_.a_scale,
                           residual_crossprod(resid_), n_, a_, sigma_);
  }
}

Matrix ContinuousSampler::fitted() const {
  Matrix f(n_, d_);
  for (int j = 0; j < d_; ++j)
    for (int i = 0; i < n_; ++i) f(i, j) = y_(i, j) - resid_[j][i];
  return f;
}

Matrix ContinuousSampler::design_fit(int design) const {
  const int rows =
      eval_x_[design].empty() ? 0 : static_cast<int>(eval_x_[design][0].size());
  return design_fit_impl(forest_, eval_assign_[design], rows);
}

void ContinuousSampler::replace_scaled_outcomes(const Matrix& y_scaled) {
  const Matrix f = fitted();
  y_ = y_scaled;
  for (int j = 0; j < d_; ++j)
    for (int i = 0; i < n_; ++i) resid_[j][i] = y_(i, j) - f(i, j);
}

void ContinuousSampler::serialize_forest(int j,
                                         std::vector<unsigned char>& out) const {
  for (const Tree& t : forest_[j]) t.serialize(out);
}

std::vector<double> ContinuousSampler::importance_shares(int j) const {
  return importance_shares_impl(forest_[j], ds_.p());
}

ProbitSampler::ProbitSampler(const Dataset& ds, const ModelConfig& cfg,
                             const CalibratedPriors& priors, std::uint64_t seed)
    : ds_(ds), cfg_(cfg), priors_(priors), rng_(seed), n_(ds.n()), d_(ds.d()) {
  check_resolved(cfg_, priors_, d_, false);
  if (d_ >= 2 && !cfg_.independence && !(cfg_.nu_prop > d_ - 1))
    fail(ErrorCode::InvalidConfig, "nu_prop must exceed d-1");
  // Latent start: the standard-normal upper/lower quartile by outcome sign.
  z_.resize(n_, d_);
  for (int j = 0; j < d_; ++j)
    for (int i = 0; i < n_; ++i)
      z_(i, j) = ds.y[j][i] == 1.0 ? 0.6745 : -0.6745;
  forest_.assign(d_, std::vector<Tree>(cfg_.m));
  assign_.assign(d_, std::vector<std::vector<int>>(
                         cfg_.m, std::vector<int>(n_, 0)));
  resid_.assign(d_, std::vector<double>(n_));
  for (int j = 0; j < d_; ++j)
    for (int i = 0; i < n_; ++i) resid_[j][i] = z_(i, j);
  sigma_ = Matrix::Identity(d_, d_);
  w_ = Matrix::Identity(d_, d_);
}

int ProbitSampler::add_design(const std::vector<std::vector<double>>& x) {
  if (stepped_)
    fail(ErrorCode::InvalidArgument,
         "prediction designs must be registered before sampling");
  const int rows = design_rows(x, ds_.p());
  eval_x_.push_back(x);
  eval_assign_.push_back(std::vector<std::vector<std::vector<int>>>(
      d_, std::vector<std::vector<int>>(cfg_.m, std::vector<int>(rows, 0))));
  return static_cast<int>(eval_x_.size()) - 1;
}

void ProbitSampler::tree_pass(int j, const std::vector<double>& u, double v) {
  const TreeMovePrior mp = move_prior_from(cfg_, priors_);
  std::vector<std::vector<std::vector<int>>*> eval_ptrs;
  for (auto& ea : eval_assign_) eval_ptrs.push_back(&ea[j]);
  const bool offsets = d_ > 1 && !cfg_.independence && !zero_offsets_;
  sweep_trees(forest_[j], assign_[j], resid_[j], ds_, offsets ? &u : nullptr,
              v, mp, rng_, moves_, eval_ptrs, eval_x_);
}

void ProbitSampler::step() {
  stepped_ = true;
  const auto& ops = kernels::active();
  for (int j = 0; j < d_; ++j) {
    std::vector<double> u(n_, 0.0);
    double v = sigma_(j, j);
    if (d_ > 1 && !cfg_.independence && !zero_offsets_) {
      const auto par = conditional_normal_params(sigma_, j);
      v = par.variance;
      int idx = 0;
      for (int k = 0; k < d_; ++k) {
        if (k == j) continue;
        ops.axpy(u.data(), par.weights[idx], resid_[k].data(), n_);
        ++idx;
      }
    }
    tree_pass(j, u, v);
    // Latent column refresh against the new fits.
    const double sd = std::sqrt(v);
    for (int i = 0; i < n_; ++i) {
      const double fit = z_(i, j) - resid_[j][i];
      const double zi = truncated_normal_sample(rng_, fit + u[i], sd,
                                                ds_.y[j][i] == 1.0);
      resid_[j][i] += zi - z_(i, j);
      z_(i, j) = zi;
    }
  }
  if (d_ > 1 && !cfg_.independence) {
    ++px_proposed_;
    if (px_correlation_step(rng_, w_, residual_crossprod(resid_), n_, cfg_.nu,
                            cfg_.nu_prop)) {
      ++px_accepted_;
      sigma_ = correlation_from(w_);
    }
  }
}

Matrix ProbitSampler::fitted() const {
  Matrix f(n_, d_);
  for (int j = 0; j < d_; ++j)
    for (int i = 0; i < n_; ++i) f(i, j) = z_(i, j) - resid_[j][i];
  return f;
}

Matrix ProbitSampler::design_fit(int design) const {
  const int rows =
      eval_x_[design].empty() ? 0 : static_cast<int>(eval_x_[design][0].size());
  return design_fit_impl(forest_, eval_assign_[design], rows);
}

void ProbitSampler::serialize_forest(int j,
                                     std::vector<unsigned char>& out) const {
  for (const Tree& t : forest_[j]) t.serialize(out);
}

std::vector<double> ProbitSampler::importance_shares(int j) const {
  return importance_shares_impl(forest_[j], ds_.p());
}

namespace {

template <typename Sampler>
void drive_chain(Sampler& s, const ModelConfig& cfg, int d, int p,
                 int n_eval_designs, ChainResult& out) {
  Matrix imp_acc = Matrix::Zero(d, p);
  std::vector<long> imp_cnt(d, 0);
  for (int iter = 0; iter < cfg.n_mcmc; ++iter) {
    s.step();
    out.sigma_all.push_back(s.sigma());
    if (iter < cfg.n_burnin) continue;
    out.sigma_retained.push_back(s.sigma());
    out.fits[0].push_back(s.fitted());
    for (int e = 0; e < n_eval_designs; ++e)
      out.fits[e + 1].push_back(s.design_fit(e));
    if (cfg.store_forests) {
      std::vector<std::vector<unsigned char>> draw(d);
      for (int j = 0; j < d; ++j) s.serialize_forest(j, draw[j]);
      out.forests.push_back(std::move(draw));
    }
    for (int j = 0; j < d; ++j) {
      const auto shares = s.importance_shares(j);
      double total = 0.0;
      for (double v : shares) total += v;
      if (total > 0.0) {
        for (int k = 0; k < p; ++k) imp_acc(j, k) += shares[k];
        ++imp_cnt[j];
      }
    }
    if constexpr (requires { s.latent(); }) {
      if (cfg.store_latents) out.latents.push_back(s.latent());
    }
  }
  out.importance = Matrix::Zero(d, p);
  for (int j = 0; j < d; ++j)
    if (imp_cnt[j] > 0) out.importance.row(j) = imp_acc.row(j) / imp_cnt[j];
  out.moves = s.moves();
  if constexpr (requires { s.px_proposed(); }) {
    out.px_proposed = s.px_proposed();
    out.px_accepted = s.px_accepted();
  }
}

}  // namespace

ChainResult run_chain(const Dataset& ds, const ModelConfig& cfg_in,
                      const std::vector<EvalDesignSpec>& designs,
                      std::uint64_t seed) {
  const Mode mode = cfg_in.mode_declared ? cfg_in.mode : infer_mode(ds);
  validate_dataset(ds, mode);
  for (int k = 0; k < ds.p(); ++k)
    if (ds.x_kinds[k] == ColumnKind::Categorical && ds.x_levels[k] > 64)
      fail(ErrorCode::InvalidArgument,
           "categorical covariates support at most 64 levels");
  ModelConfig cfg = cfg_in;
  cfg.resolve(mode, ds.n(), ds.d());
  for (const auto& e : designs)
    validate_covariates_against(ds, e.x, ds.x_kinds, ds.x_levels);

  ChainResult out;
  if (mode == Mode::Continuous) {
    out.scaler = OutcomeScaler::fit(ds.y);
    out.priors = calibrate_priors(ds, cfg, &out.scaler);
  } else {
    out.priors = calibrate_priors(ds, cfg, nullptr);
  }
  out.config = cfg;
  out.design_names.push_back("train");
  for (const auto& e : designs) out.design_names.push_back(e.name);
  out.fits.resize(1 + designs.size());

  if (mode == Mode::Continuous) {
    ContinuousSampler s(ds, cfg, out.priors, seed);
    for (const auto& e : designs) s.add_design(e.x);
    drive_chain(s, cfg, ds.d(), ds.p(), static_cast<int>(designs.size()), out);
  } else {
    ProbitSampler s(ds, cfg, out.priors, seed);
    for (const auto& e : designs) s.add_design(e.x);
    drive_chain(s, cfg, ds.d(), ds.p(), static_cast<int>(designs.size()), out);
  }
  return out;
}

std::vector<ChainResult> run_chains(const Dataset& ds, const ModelConfig& cfg,
                                    const std::vector<EvalDesignSpec>& designs) {
  std::vector<ChainResult> out;
  out.reserve(cfg.n_chains);
  for (int c = 0; c < cfg.n_chains; ++c)
    out.push_back(
        run_chain(ds, cfg, designs, splitmix64(cfg.seed ^ splitmix64(5000 + c))));
  return out;
}

}  // namespace surt
