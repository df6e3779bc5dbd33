#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "support/stats_oracles.hpp"
#include "surt/distributions.hpp"
#include "surt/errors.hpp"
#include "surt/linalg.hpp"
#include "surt/rng.hpp"
#include "surt/special.hpp"

using namespace surt;

TEST_CASE("normal quantile round trip and known values") {
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  for (double p : {1e-10, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.99, 1 - 1e-6}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("rng determinism and stream derivation") {
  Rng a(12345), b(12345);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c = a.derive(1), d = a.derive(2);
  CHECK(c.next_u64() != d.next_u64());
  // deriving does not disturb the parent stream
  Rng e(12345);
  for (int i = 0; i < 100; ++i) e.normal();
  CHECK(a.normal() == e.normal());
}

TEST_CASE("rng gamma moments") {
  Rng rng(7);
  const int n = 200000;
  for (double shape : {0.5, 1.0, 4.7}) {
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape, 2.0);
      s += g;
      ss += g * g;
    }
    const double m = s / n;
    const double v = ss / n - m * m;
    CHECK(m == doctest::Approx(shape * 2.0).epsilon(0.02));
    CHECK(v == doctest::Approx(shape * 4.0).epsilon(0.05));
  }
}

TEST_CASE("conditional normal params worked example") {
  Matrix sigma(2, 2);
  sigma << 1.0, 7.5, 7.5, 100.0;
  const auto p = conditional_normal_params(sigma, 0);
  REQUIRE(p.weights.size() == 1);
  CHECK(p.weights[0] == doctest::Approx(0.075).epsilon(1e-14));
  CHECK(p.variance == doctest::Approx(0.4375).epsilon(1e-14));

  const auto q = conditional_normal_params(sigma, 1);
  REQUIRE(q.weights.size() == 1);
  CHECK(q.weights[0] == doctest::Approx(7.5).epsilon(1e-14));
  CHECK(q.variance == doctest::Approx(100.0 - 56.25).epsilon(1e-14));

  Matrix one(1, 1);
  one << 2.5;
  const auto r = conditional_normal_params(one, 0);
  CHECK(r.weights.empty());
  CHECK(r.variance == 2.5);
}

TEST_CASE("conditional normal params against precision-matrix identity") {
  // independent oracle: v_j = 1/(Sigma^{-1})_jj, w_k = -(Sigma^{-1})_jk * v_j
  Rng rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 2 + rep % 4;
    Matrix b(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
    Matrix sigma = b * b.transpose() + d * Matrix::Identity(d, d);
    const Matrix prec = sigma.inverse();
    for (int j = 0; j < d; ++j) {
      const auto p = conditional_normal_params(sigma, j);
      const double v = 1.0 / prec(j, j);
      CHECK(p.variance == doctest::Approx(v).epsilon(1e-10));
      CHECK(p.variance <= sigma(j, j) + 1e-12);
      int k = 0;
      for (int a = 0; a < d; ++a) {
        if (a == j) continue;
        CHECK(p.weights[k++] == doctest::Approx(-prec(j, a) * v).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("conditional decomposition satisfies law of total variance") {
  Matrix sigma(3, 3);
  sigma << 4.0, 1.2, -0.8, 1.2, 2.0, 0.5, -0.8, 0.5, 1.5;
  const Matrix l = chol_spd(sigma);
  // Cholesky reconstruction
  CHECK(((l * l.transpose()) - sigma).cwiseAbs().maxCoeff() < 1e-12);

  Rng rng(4);
  const int n = 200000;
  const int j = 1;
  const auto p = conditional_normal_params(sigma, j);
  std::vector<double> resid(n);
  const Vector zero = Vector::Zero(3);
  for (int i = 0; i < n; ++i) {
    const Vector y = mvn_sample(rng, zero, l);
    double u = 0.0;
    int k = 0;
    for (int a = 0; a < 3; ++a)
      if (a != j) u += p.weights[k++] * y(a);
    resid[i] = y(j) - u;
  }
  // var(y_j - w.y_rest) equals the conditional variance
  CHECK(oracle::variance(resid) == doctest::Approx(p.variance).epsilon(0.02));
}

TEST_CASE("mvn sample moments") {
  Matrix sigma(2, 2);
  sigma << 1.0, 0.5, 0.5, 1.0;
  Vector mu(2);
  mu << 1.0, 2.0;
  const Matrix l = chol_spd(sigma);
  Rng rng(11);
  const int n = 200000;
  std::vector<double> x0(n), x1(n);
  for (int i = 0; i < n; ++i) {
    const Vector y = mvn_sample(rng, mu, l);
    x0[i] = y(0);
    x1[i] = y(1);
  }
  CHECK(oracle::mean(x0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(oracle::mean(x1) == doctest::Approx(2.0).epsilon(0.01));
  CHECK(oracle::variance(x0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(oracle::covariance(x0, x1) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("inverse gamma sampler matches analytic distribution") {
  Rng rng(21);
  const int n = 100000;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = inv_gamma_sample(rng, 3.0, 2.0);
  CHECK(oracle::mean(draws) == doctest::Approx(1.0).epsilon(0.02));
  // KS against F(x) = 1 - P(shape, scale/x)
  const double ks = oracle::ks_one_sample(
      draws, [](double x) { return 1.0 - gamma_p(3.0, 2.0 / x); });
  CHECK(ks < 0.01);
}

TEST_CASE("wishart and inverse wishart moments") {
  Rng rng(31);
  Matrix s(2, 2);
  s << 1.0, 0.3, 0.3, 2.0;
  const int n = 50000;
  Matrix acc = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) acc += wishart_sample(rng, 7.0, s);
  acc /= n;
  CHECK((acc - 7.0 * s).cwiseAbs().maxCoeff() < 0.1);

  // E[IW(df, I)] = I / (df - d - 1)
  Matrix acc2 = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i)
    acc2 += inv_wishart_sample(rng, 10.0, Matrix::Identity(2, 2));
  acc2 /= n;
  CHECK(acc2(0, 0) == doctest::Approx(1.0 / 7.0).epsilon(0.05));
  CHECK(acc2(1, 1) == doctest::Approx(1.0 / 7.0).epsilon(0.05));
  CHECK(std::fabs(acc2(0, 1)) < 0.01);
}

TEST_CASE("inverse wishart at d=1 reduces to inverse gamma") {
  Rng rng(41);
  const double df = 6.0, s = 3.0;
  const int n = 100000;
  std::vector<double> iw(n), ig(n);
  Matrix sm(1, 1);
  sm << s;
  for (int i = 0; i < n; ++i) {
    iw[i] = inv_wishart_sample(rng, df, sm)(0, 0);
    ig[i] = inv_gamma_sample(rng, 0.5 * df, 0.5 * s);
  }
  CHECK(oracle::ks_two_sample(iw, ig) < 0.01);

  // density agreement through the same identity
  for (double x : {0.2, 0.5, 1.0, 2.7}) {
    Matrix xm(1, 1);
    xm << x;
    const double alpha = 0.5 * df, beta = 0.5 * s;
    const double ig_logpdf = alpha * std::log(beta) - std::lgamma(alpha) -
                             (alpha + 1.0) * std::log(x) - beta / x;
    CHECK(inv_wishart_logpdf(xm, df, sm) ==
          doctest::Approx(ig_logpdf).epsilon(1e-12));
  }
}

TEST_CASE("truncated normal worked values and regimes") {
  Rng rng(51);
  const int n = 200000;

  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = truncated_normal_sample(rng, 0.0, 1.0, true);
    REQUIRE(x > 0.0);
    s += x;
  }
  CHECK(s / n == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.01));

  s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = truncated_normal_sample(rng, 2.0, 1.0, true);
    REQUIRE(x > 0.0);
    s += x;
  }
  CHECK(s / n ==
        doctest::Approx(2.0 + norm_pdf(2.0) / norm_cdf(2.0)).epsilon(0.005));

  // far-tail regime (rejection path): mean of N(0,1) given > 5
  s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = truncated_normal_sample(rng, -5.0, 1.0, true) + 5.0;
    REQUIRE(x > 5.0);
    s += x - 5.0;
  }
  const double mills5 = norm_pdf(5.0) / norm_cdf(-5.0) - 5.0;
  CHECK(s / n == doctest::Approx(mills5).epsilon(0.02));

  // nonpositive side mirrors the positive side
  s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = truncated_normal_sample(rng, 2.0, 1.0, false);
    REQUIRE(x <= 0.0);
    s += x;
  }
  CHECK(s / n ==
        doctest::Approx(2.0 - norm_pdf(2.0) / norm_cdf(-2.0)).epsilon(0.01));
}

TEST_CASE("distribution validation errors") {
  Rng rng(61);
  Matrix s2 = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(wishart_sample(rng, 0.5, s2), Error);
  CHECK_THROWS_AS(inv_gamma_sample(rng, -1.0, 1.0), Error);
  CHECK_THROWS_AS(truncated_normal_sample(rng, 0.0, 0.0, true), Error);
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(chol_spd(bad), Error);
}
