#include "surt/linalg.hpp"

#include <cmath>

#include "surt/errors.hpp"

namespace surt {

Matrix chol_spd(const Matrix& s) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double jitter = 1e-10 * s.trace() / static_cast<double>(s.rows());
  Matrix adjusted = s;
  adjusted.diagonal().array() += jitter;
  llt.compute(adjusted);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  fail(ErrorCode::NotPositiveDefinite,
       "matrix is not positive definite after diagonal jitter");
}

double logdet_from_chol(const Matrix& l) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Matrix spd_inverse(const Matrix& s) {
  const Matrix l = chol_spd(s);
  Matrix identity = Matrix::Identity(s.rows(), s.cols());
  // s^{-1} = L^{-T} L^{-1}
  Matrix linv = l.triangularView<Eigen::Lower>().solve(identity);
  return linv.transpose() * linv;
}

}  // namespace surt
