#include "surt/cea.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "surt/errors.hpp"
#include "surt/rng.hpp"
#include "surt/special.hpp"
#include "surt/trees.hpp"

namespace surt {
namespace {

void check_treatment(const std::vector<double>& t, int n) {
  if (static_cast<int>(t.size()) != n)
    fail(ErrorCode::InvalidArgument,
         "treatment length does not match the data");
  bool saw0 = false, saw1 = false;
  for (double v : t) {
    if (v == 0.0)
      saw0 = true;
    else if (v == 1.0)
      saw1 = true;
    else
      fail(ErrorCode::NonBinaryOutcome, "treatment must be {0,1}-valued");
  }
  if (!saw0 || !saw1)
    fail(ErrorCode::ConstantOutcome, "treatment takes a single value");
}

void append_column(Dataset& ds, const std::string& name,
                   const std::vector<double>& col) {
  for (const auto& existing : ds.x_names)
    if (existing == name)
      fail(ErrorCode::InvalidArgument,
           "covariate column " + name + " already exists; rename or drop it");
  ds.x_names.push_back(name);
  ds.x_kinds.push_back(ColumnKind::Continuous);
  ds.x_levels.push_back(0);
  ds.x.push_back(col);
}

// Mean toggle difference per outcome for one retained draw, original units.
void toggle_means(const CeaFit& fit, std::size_t k, double& dc, double& dq) {
  const Matrix& f1 = fit.chain.fits[fit.treat1][k];
  const Matrix& f0 = fit.chain.fits[fit.treat0][k];
  const double n = static_cast<double>(f1.rows());
  dc = fit.chain.scaler.range(0) * (f1.col(0) - f0.col(0)).sum() / n;
  dq = fit.chain.scaler.range(1) * (f1.col(1) - f0.col(1)).sum() / n;
}

}  // namespace

std::vector<double> fit_propensity(const Dataset& ds,
                                   const std::vector<double>& treatment,
                                   const ModelConfig& cfg,
                                   std::uint64_t seed) {
  const int n = ds.n();
  check_treatment(treatment, n);

  Dataset pd;
  pd.x_names = ds.x_names;
  pd.x_kinds = ds.x_kinds;
  pd.x_levels = ds.x_levels;
  pd.x = ds.x;
  pd.y_names = {"treatment"};
  pd.y = {treatment};

  ModelConfig pc = cfg;
  pc.mode = Mode::Probit;
  pc.mode_declared = true;
  pc.seed = seed;
  pc.n_chains = 1;
  pc.store_forests = false;
  pc.store_latents = false;

  const ChainResult chain = run_chain(pd, pc, {}, seed);
  const auto& fits = chain.fits[0];
  std::vector<double> ps(n, 0.0);
  for (const Matrix& f : fits)
    for (int i = 0; i < n; ++i) ps[i] += norm_cdf(f(i, 0));
  for (double& v : ps) v /= static_cast<double>(fits.size());
  return ps;
}

CeaFit cea_fit(const Dataset& ds, const std::vector<double>& treatment,
               const ModelConfig& cfg, bool use_propensity,
               std::uint64_t seed) {
  if (ds.d() != 2)
    fail(ErrorCode::InvalidArgument,
         "cost-effectiveness fitting expects exactly two outcome columns");
  check_treatment(treatment, ds.n());

  CeaFit out;
  Dataset aug = ds;
  append_column(aug, "treatment", treatment);
  if (use_propensity) {
    out.propensity =
        fit_propensity(ds, treatment, cfg, splitmix64(seed ^ splitmix64(7100)));
    append_column(aug, "propensity", out.propensity);
  }

  // Toggle designs keep every non-treatment column, the propensity score
  // included, at its observed value.
  const int tcol = ds.p();
  std::vector<std::vector<double>> x1 = aug.x;
  std::vector<std::vector<double>> x0 = aug.x;
  std::fill(x1[tcol].begin(), x1[tcol].end(), 1.0);
  std::fill(x0[tcol].begin(), x0[tcol].end(), 0.0);

  ModelConfig oc = cfg;
  oc.mode = Mode::Continuous;
  oc.mode_declared = true;
  oc.seed = seed;

  std::vector<EvalDesignSpec> designs;
  designs.push_back({"treat1", std::move(x1)});
  designs.push_back({"treat0", std::move(x0)});
  out.chain = run_chain(aug, oc, designs, seed);
  out.design_columns = aug.x_names;
  out.treat1 = 1;
  out.treat0 = 2;
  return out;
}

CeaDraws mate_draws(const CeaFit& fit) {
  if (fit.treat1 < 0 || fit.treat0 < 0 ||
      fit.treat1 >= static_cast<int>(fit.chain.fits.size()) ||
      fit.treat0 >= static_cast<int>(fit.chain.fits.size()))
    fail(ErrorCode::InvalidArgument, "fit is missing the toggle designs");
  const std::size_t m = fit.chain.fits[fit.treat1].size();
  CeaDraws out;
  out.delta_c.resize(m);
  out.delta_q.resize(m);
  for (std::size_t k = 0; k < m; ++k)
    toggle_means(fit, k, out.delta_c[k], out.delta_q[k]);
  return out;
}

std::vector<double> inb_draws(const CeaDraws& draws, double lambda) {
  if (lambda < 0.0)
    fail(ErrorCode::InvalidArgument,
         "willingness-to-pay must be non-negative");
  if (draws.delta_c.size() != draws.delta_q.size())
    fail(ErrorCode::InvalidArgument, "treatment-effect draw counts differ");
  std::vector<double> out(draws.delta_c.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = lambda * draws.delta_q[k] - draws.delta_c[k];
  return out;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  grid.reserve(81);
  for (int k = 0; k <= 80; ++k) grid.push_back(1000.0 * k);
  return grid;
}

std::vector<CeacPoint> ceac(const CeaDraws& draws,
                            const std::vector<double>& grid) {
  if (draws.delta_c.empty())
    fail(ErrorCode::InvalidArgument, "no treatment-effect draws");
  std::vector<CeacPoint> out;
  out.reserve(grid.size());
  for (double lambda : grid) {
    const std::vector<double> inb = inb_draws(draws, lambda);
    long above = 0;
    for (double v : inb)
      if (v > 0.0) ++above;
    out.push_back({lambda, above / static_cast<double>(inb.size())});
  }
  return out;
}

double normal_theory_ce_probability(double mean_dq, double mean_dc,
                                    double var_dq, double var_dc, double cov,
                                    double lambda) {
  const double var =
      lambda * lambda * var_dq + var_dc - 2.0 * lambda * cov;
  if (var <= 0.0)
    fail(ErrorCode::ZeroVariance,
         "net benefit variance is not positive at this willingness-to-pay");
  return norm_cdf((lambda * mean_dq - mean_dc) / std::sqrt(var));
}

CateTable cate_cinb(const CeaFit& fit, double lambda) {
  if (lambda < 0.0)
    fail(ErrorCode::InvalidArgument,
         "willingness-to-pay must be non-negative");
  const std::size_t m = fit.chain.fits[fit.treat1].size();
  if (m == 0) fail(ErrorCode::InvalidArgument, "no retained draws");
  const int n = static_cast<int>(fit.chain.fits[fit.treat1][0].rows());
  const double rc = fit.chain.scaler.range(0);
  const double rq = fit.chain.scaler.range(1);

  CateTable out;
  out.tau_c.assign(n, 0.0);
  out.tau_q.assign(n, 0.0);
  out.cinb.assign(n, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const Matrix& f1 = fit.chain.fits[fit.treat1][k];
    const Matrix& f0 = fit.chain.fits[fit.treat0][k];
    for (int i = 0; i < n; ++i) {
      const double tc = rc * (f1(i, 0) - f0(i, 0));
      const double tq = rq * (f1(i, 1) - f0(i, 1));
      out.tau_c[i] += tc;
      out.tau_q[i] += tq;
      out.cinb[i] += lambda * tq - tc;
    }
  }
  const double dm = static_cast<double>(m);
  for (int i = 0; i < n; ++i) {
    out.tau_c[i] /= dm;
    out.tau_q[i] /= dm;
    out.cinb[i] /= dm;
  }
  return out;
}

Matrix importance_from_forests(const ChainResult& chain) {
  if (chain.forests.empty())
    fail(ErrorCode::InvalidArgument, "chain holds no stored forests");
  const int d = static_cast<int>(chain.forests[0].size());
  const int p = static_cast<int>(chain.importance.cols());
  Matrix acc = Matrix::Zero(d, p);
  std::vector<long> contributing(d, 0);
  for (const auto& draw : chain.forests) {
    for (int j = 0; j < d; ++j) {
      std::vector<int> counts(p, 0);
      std::size_t off = 0;
      while (off < draw[j].size()) {
        const Tree t = Tree::deserialize(draw[j], off);
        t.count_splits(counts);
      }
      long total = 0;
      for (int c : counts) total += c;
      if (total == 0) continue;
      for (int k = 0; k < p; ++k)
        acc(j, k) += counts[k] / static_cast<double>(total);
      ++contributing[j];
    }
  }
  Matrix out = Matrix::Zero(d, p);
  for (int j = 0; j < d; ++j)
    if (contributing[j] > 0) out.row(j) = acc.row(j) / contributing[j];
  return out;
}

}  // namespace surt
