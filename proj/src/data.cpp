#include "surt/data.hpp"

#include <cmath>
#include <set>

#include "surt/errors.hpp"

namespace surt {

namespace {

bool is_binary_column(const std::vector<double>& col) {
  for (double v : col)
    if (v != 0.0 && v != 1.0) return false;
  return true;
}

}  // namespace

Mode infer_mode(const Dataset& ds) {
  for (const auto& col : ds.y)
    if (!is_binary_column(col)) return Mode::Continuous;
  return Mode::Probit;
}

void validate_dataset(const Dataset& ds, Mode mode) {
  if (ds.n() == 0) fail(ErrorCode::EmptyData, "dataset has no rows");
  if (ds.d() == 0) fail(ErrorCode::EmptyData, "dataset has no outcome columns");
  if (ds.p() == 0) fail(ErrorCode::EmptyData, "dataset has no covariates");
  const std::size_t n = static_cast<std::size_t>(ds.n());
  for (int c = 0; c < ds.p(); ++c) {
    if (ds.x[c].size() != n)
      fail(ErrorCode::InvalidArgument, "covariate column length mismatch");
    for (double v : ds.x[c])
      if (!std::isfinite(v))
        fail(ErrorCode::NonFiniteValue,
             "non-finite value in covariate " + ds.x_names[c]);
    if (ds.x_kinds[c] == ColumnKind::Categorical) {
      const int levels = ds.x_levels[c];
      if (levels < 2)
        fail(ErrorCode::InvalidArgument,
             "categorical covariate " + ds.x_names[c] + " needs >= 2 levels");
      for (double v : ds.x[c]) {
        if (v != std::floor(v) || v < 0.0 || v >= levels)
          fail(ErrorCode::UnknownCategoryLevel,
               "covariate " + ds.x_names[c] + " has code outside 0.." +
                   std::to_string(levels - 1));
      }
    }
  }
  for (int j = 0; j < ds.d(); ++j) {
    if (ds.y[j].size() != n)
      fail(ErrorCode::InvalidArgument, "outcome column length mismatch");
    for (double v : ds.y[j])
      if (!std::isfinite(v))
        fail(ErrorCode::NonFiniteValue,
             "non-finite value in outcome " + ds.y_names[j]);
    if (mode == Mode::Probit) {
      if (!is_binary_column(ds.y[j]))
        fail(ErrorCode::NonBinaryOutcome,
             "outcome " + ds.y_names[j] + " is not {0,1}-valued");
    } else {
      double lo = ds.y[j][0], hi = ds.y[j][0];
      for (double v : ds.y[j]) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == hi)
        fail(ErrorCode::ConstantOutcome,
             "outcome " + ds.y_names[j] + " is constant");
    }
  }
}

void validate_covariates_against(const Dataset& train,
                                 const std::vector<std::vector<double>>& x_new,
                                 const std::vector<ColumnKind>& kinds,
                                 const std::vector<int>& levels) {
  if (static_cast<int>(x_new.size()) != train.p())
    fail(ErrorCode::MissingColumn, "prediction table has wrong covariate count");
  if (x_new.empty() || x_new[0].empty())
    fail(ErrorCode::EmptyData, "prediction table has no rows");
  for (std::size_t c = 0; c < x_new.size(); ++c) {
    if (kinds[c] != train.x_kinds[c])
      fail(ErrorCode::InvalidArgument, "covariate kind mismatch in column " +
                                           train.x_names[c]);
    for (double v : x_new[c]) {
      if (!std::isfinite(v))
        fail(ErrorCode::NonFiniteValue,
             "non-finite value in covariate " + train.x_names[c]);
      if (kinds[c] == ColumnKind::Categorical &&
          (v != std::floor(v) || v < 0.0 || v >= levels[c]))
        fail(ErrorCode::UnknownCategoryLevel,
             "unseen level in covariate " + train.x_names[c]);
    }
  }
}

OutcomeScaler OutcomeScaler::fit(const std::vector<std::vector<double>>& y) {
  OutcomeScaler s;
  for (const auto& col : y) {
    double lo = col[0], hi = col[0];
    for (double v : col) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo == hi)
      fail(ErrorCode::ConstantOutcome, "cannot scale a constant outcome");
    s.ymin.push_back(lo);
    s.ymax.push_back(hi);
  }
  return s;
}

std::vector<double> OutcomeScaler::scale_column(
    int j, const std::vector<double>& col) const {
  std::vector<double> out(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) out[i] = scale(j, col[i]);
  return out;
}

void ModelConfig::resolve(Mode resolved_mode, int n, int d) {
  mode = resolved_mode;
  mode_declared = true;
  if (n_mcmc < 0) n_mcmc = (mode == Mode::Probit) ? 10000 : 5000;
  if (n_burnin < 0) n_burnin = (mode == Mode::Probit) ? 2000 : 1000;
  if (nu_prop < 0.0 && mode == Mode::Probit && d >= 2)
    nu_prop = (d == 2) ? n / 10.0 : n / 2.0;
  validate(d);
  if (mode == Mode::Probit && d >= 2 && !(nu_prop > d - 1))
    fail(ErrorCode::InvalidConfig, "nu_prop must exceed d-1");
}

void ModelConfig::validate(int d) const {
  if (m < 1) fail(ErrorCode::InvalidConfig, "m must be >= 1");
  if (!(kappa > 0.0)) fail(ErrorCode::InvalidConfig, "kappa must be > 0");
  if (!(q_z > 0.0)) fail(ErrorCode::InvalidConfig, "q_z must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(ErrorCode::InvalidConfig, "alpha must be in (0,1)");
  if (!(beta >= 0.0)) fail(ErrorCode::InvalidConfig, "beta must be >= 0");
  if (!(nu >= 1.0)) fail(ErrorCode::InvalidConfig, "nu must be >= 1");
  if (!(alpha_sigma > 0.0 && alpha_sigma < 1.0))
    fail(ErrorCode::InvalidConfig, "alpha_sigma must be in (0,1)");
  if (n_mcmc >= 0 && n_burnin >= 0 && n_burnin >= n_mcmc)
    fail(ErrorCode::InvalidConfig, "n_burnin must be < n_mcmc");
  const double psum = p_grow + p_prune + p_change;
  if (!(p_grow >= 0.0 && p_prune >= 0.0 && p_change >= 0.0) ||
      std::fabs(psum - 1.0) > 1e-12)
    fail(ErrorCode::InvalidConfig, "move probabilities must sum to 1");
  if (n_chains < 1) fail(ErrorCode::InvalidConfig, "n_chains must be >= 1");
  if (d < 1) fail(ErrorCode::InvalidConfig, "need at least one outcome");
}

}  // namespace surt
