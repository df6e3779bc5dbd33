#include "surt/posterior.hpp"

#include <algorithm>
#include <cmath>

#include "surt/distributions.hpp"
#include "surt/errors.hpp"
#include "surt/special.hpp"
#include "surt/trees.hpp"

namespace surt {

std::vector<Matrix> evaluate_forests(
    const ChainResult& chain, const std::vector<std::vector<double>>& x) {
  if (chain.forests.empty())
    fail(ErrorCode::InvalidArgument,
         "chain has no stored forests to evaluate");
  const int rows = x.empty() ? 0 : static_cast<int>(x[0].size());
  const int m = chain.config.m;
  std::vector<Matrix> out;
  out.reserve(chain.forests.size());
  for (const auto& draw : chain.forests) {
    const int d = static_cast<int>(draw.size());
    Matrix fit = Matrix::Zero(rows, d);
    for (int j = 0; j < d; ++j) {
      std::size_t off = 0;
      for (int t = 0; t < m; ++t) {
        const Tree tree = Tree::deserialize(draw[j], off);
        for (int i = 0; i < rows; ++i) fit(i, j) += tree.evaluate(x, i);
      }
      if (off != draw[j].size())
        fail(ErrorCode::ParseError, "forest blob has trailing bytes");
    }
    out.push_back(std::move(fit));
  }
  return out;
}

std::vector<Matrix> predictive_draws_continuous(const ChainResult& chain,
                                                const std::vector<Matrix>& fits,
                                                std::uint64_t noise_seed,
                                                bool with_noise) {
  if (fits.size() != chain.sigma_retained.size())
    fail(ErrorCode::InvalidArgument,
         "fit draws do not match retained covariance draws");
  Rng rng(noise_seed);
  std::vector<Matrix> out;
  out.reserve(fits.size());
  const int d = static_cast<int>(chain.scaler.ymin.size());
  const Vector zero = Vector::Zero(d);
  for (std::size_t k = 0; k < fits.size(); ++k) {
    Matrix draw = fits[k];
    if (with_noise) {
      const Matrix chol = chol_spd(chain.sigma_retained[k]);
      for (int i = 0; i < draw.rows(); ++i) {
        const Vector eps = mvn_sample(rng, zero, chol);
        for (int j = 0; j < d; ++j) draw(i, j) += eps(j);
      }
    }
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < draw.rows(); ++i)
        draw(i, j) = chain.scaler.unscale(j, draw(i, j));
    out.push_back(std::move(draw));
  }
  return out;
}

std::vector<Matrix> probability_draws_probit(const std::vector<Matrix>& fits) {
  std::vector<Matrix> out;
  out.reserve(fits.size());
  for (const Matrix& f : fits) {
    Matrix p = f;
    for (int j = 0; j < p.cols(); ++j)
      for (int i = 0; i < p.rows(); ++i) p(i, j) = norm_cdf(p(i, j));
    out.push_back(std::move(p));
  }
  return out;
}

double empirical_quantile(std::vector<double> draws, double p) {
  if (draws.empty()) fail(ErrorCode::InvalidArgument, "quantile of no draws");
  std::sort(draws.begin(), draws.end());
  const double h = (draws.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= draws.size()) return draws.back();
  return draws[lo] + (h - lo) * (draws[lo + 1] - draws[lo]);
}

Interval quantile_interval(const std::vector<double>& draws, double level) {
  if (level <= 0.0 || level >= 1.0)
    fail(ErrorCode::InvalidArgument, "interval level must be in (0,1)");
  const double tail = 0.5 * (1.0 - level);
  return {empirical_quantile(draws, tail), empirical_quantile(draws, 1.0 - tail)};
}

PredictiveSummary summarize_draws(const std::vector<Matrix>& draws,
                                  double level) {
  if (draws.empty()) fail(ErrorCode::InvalidArgument, "no draws to summarize");
  const int rows = static_cast<int>(draws[0].rows());
  const int d = static_cast<int>(draws[0].cols());
  PredictiveSummary out;
  out.mean = Matrix::Zero(rows, d);
  out.lo = Matrix::Zero(rows, d);
  out.hi = Matrix::Zero(rows, d);
  std::vector<double> cell(draws.size());
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < draws.size(); ++k) cell[k] = draws[k](i, j);
      double s = 0.0;
      for (double v : cell) s += v;
      out.mean(i, j) = s / cell.size();
      const Interval iv = quantile_interval(cell, level);
      out.lo(i, j) = iv.lo;
      out.hi(i, j) = iv.hi;
    }
  return out;
}

double interval_coverage(const std::vector<Interval>& intervals,
                         const std::vector<double>& truth) {
  if (intervals.size() != truth.size())
    fail(ErrorCode::InvalidArgument, "coverage inputs differ in length");
  if (intervals.empty())
    fail(ErrorCode::InvalidArgument, "coverage of no intervals");
  int inside = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] >= intervals[i].lo && truth[i] <= intervals[i].hi) ++inside;
  return inside / static_cast<double>(truth.size());
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    fail(ErrorCode::InvalidArgument, "rmse inputs differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    s += e * e;
  }
  return std::sqrt(s / pred.size());
}

double crps(const std::vector<Matrix>& draws, const std::vector<double>& truth,
            int outcome) {
  const std::size_t m = draws.size();
  if (m < 2) fail(ErrorCode::InvalidArgument, "crps needs at least two draws");
  if (truth.size() != static_cast<std::size_t>(draws[0].rows()))
    fail(ErrorCode::InvalidArgument, "crps truth length mismatch");
  std::vector<double> x(m);
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) x[k] = draws[k](i, outcome);
    std::sort(x.begin(), x.end());
    double abs_err = 0.0;
    for (double v : x) abs_err += std::fabs(v - truth[i]);
    // Sum over ordered pairs |x_a - x_b| = 2 * sum_k (2k + 1 - m) x_(k).
    double spread = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      spread += (2.0 * k + 1.0 - m) * x[k];
    spread *= 2.0;
    total += abs_err / m - 0.5 * spread / (double(m) * m);
  }
  return total / truth.size();
}

namespace {

double clipped(double p) {
  const double eps = 1e-12;
  return std::min(1.0 - eps, std::max(eps, p));
}

}  // namespace

double log_loss(const std::vector<double>& prob,
                const std::vector<double>& truth) {
  if (prob.size() != truth.size() || prob.empty())
    fail(ErrorCode::InvalidArgument, "log loss inputs differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = clipped(prob[i]);
    s -= truth[i] == 1.0 ? std::log(p) : std::log(1.0 - p);
  }
  return s / prob.size();
}

double accuracy(const std::vector<double>& prob,
                const std::vector<double>& truth) {
  if (prob.size() != truth.size() || prob.empty())
    fail(ErrorCode::InvalidArgument, "accuracy inputs differ in length");
  int hit = 0;
  for (std::size_t i = 0; i < prob.size(); ++i)
    if ((prob[i] > 0.5) == (truth[i] == 1.0)) ++hit;
  return hit / static_cast<double>(prob.size());
}

Matrix sigma_to_original(const OutcomeScaler& scaler, const Matrix& sigma) {
  const int d = static_cast<int>(sigma.rows());
  Matrix out(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      out(j, k) = sigma(j, k) * scaler.range(j) * scaler.range(k);
  return out;
}

TraceTable sigma_traces(const ChainResult& chain) {
  TraceTable out;
  const int d = chain.sigma_all.empty()
                    ? 0
                    : static_cast<int>(chain.sigma_all[0].rows());
  const bool probit = chain.config.mode == Mode::Probit;
  out.names.push_back("iteration");
  std::vector<std::pair<int, int>> cells;
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      if (probit && j == k) continue;
      cells.emplace_back(j, k);
      const std::string tag = probit ? "rho" : "sigma";
      out.names.push_back(tag + "_" + std::to_string(j) + "_" +
                          std::to_string(k));
    }
  out.columns.assign(out.names.size(),
                     std::vector<double>(chain.sigma_all.size()));
  for (std::size_t it = 0; it < chain.sigma_all.size(); ++it) {
    out.columns[0][it] = static_cast<double>(it + 1);
    for (std::size_t c = 0; c < cells.size(); ++c)
      out.columns[c + 1][it] =
          chain.sigma_all[it](cells[c].first, cells[c].second);
  }
  return out;
}

}  // namespace surt
