#pragma once

#include <Eigen/Dense>

namespace surt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Lower Cholesky factor of an SPD matrix. On factorization failure a single
// jitter of 1e-10 * trace/d is added to the diagonal; if that also fails the
// call is a hard NotPositiveDefinite error (no silent retry loop).
Matrix chol_spd(const Matrix& s);

// 2 * sum(log(diag(l))) for a lower Cholesky factor l
double logdet_from_chol(const Matrix& l);

// Inverse of an SPD matrix through its Cholesky factorization
Matrix spd_inverse(const Matrix& s);

}  // namespace surt
