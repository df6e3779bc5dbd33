#pragma once

namespace surt {

double norm_pdf(double x);
double norm_cdf(double x);
// Inverse standard normal CDF (Wichura's AS 241, double precision).
double norm_quantile(double p);

// log of the multivariate gamma function Gamma_d(a)
double lgamma_multivariate(int d, double a);

// Regularized incomplete beta I_x(a, b)
double ibeta_reg(double a, double b, double x);

// Regularized lower incomplete gamma P(a, x)
double gamma_p(double a, double x);

}  // namespace surt
