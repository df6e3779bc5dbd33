#include "surt/special.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "surt/errors.hpp"

namespace surt {

double norm_pdf(double x) {
  static const double kInvSqrt2Pi = 0.3989422804014326779;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) {
  static const double kInvSqrt2 = 0.7071067811865475244;
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    fail(ErrorCode::InvalidArgument, "norm_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) *
                    r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) *
                    r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) *
                    r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) *
                    r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

double lgamma_multivariate(int d, double a) {
  static const double kLogPi = 1.1447298858494001741;
  double s = 0.25 * d * (d - 1) * kLogPi;
  for (int i = 0; i < d; ++i) s += std::lgamma(a - 0.5 * i);
  return s;
}

double ibeta_reg(double a, double b, double x) {
  return boost::math::ibeta(a, b, x);
}

double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::ConstantOutcome: return "ConstantOutcome";
    case ErrorCode::NonBinaryOutcome: return "NonBinaryOutcome";
    case ErrorCode::UnknownCategoryLevel: return "UnknownCategoryLevel";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InvalidDf: return "InvalidDf";
    case ErrorCode::TailSamplingFailure: return "TailSamplingFailure";
    case ErrorCode::CalibrationBracketFailure: return "CalibrationBracketFailure";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

bool error_code_is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::TailSamplingFailure:
    case ErrorCode::CalibrationBracketFailure:
    case ErrorCode::NumericalFailure:
      return true;
    default:
      return false;
  }
}

}  // namespace surt
