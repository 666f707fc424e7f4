#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace covsteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Condition numbers above this are treated as singular.
inline constexpr double kSingularCondition = 1e12;

inline Matrix symmetrize(const Matrix& x) { return 0.5 * (x + x.transpose()); }

double min_eigenvalue(const Matrix& symmetric);
double max_eigenvalue(const Matrix& symmetric);

/// Unique positive semidefinite square root; tiny negative eigenvalues are clamped.
Matrix sqrtm_psd(const Matrix& symmetric);
/// Inverse square root of a positive definite matrix.
Matrix inv_sqrtm_pd(const Matrix& symmetric);

/// 2-norm condition number (infinity when singular).
double condition_number(const Matrix& x);

/// Inverse via column-pivoted QR. Throws SingularMatrixError when the
/// condition estimate exceeds `max_condition`.
Matrix checked_inverse(const Matrix& x, std::string_view what,
                       double max_condition = kSingularCondition);

inline double max_abs(const Matrix& x) {
  return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

/// Lower bound on the spectral gap X - Y in the Loewner order.
inline double loewner_margin(const Matrix& x, const Matrix& y) {
  return min_eigenvalue(symmetrize(x - y));
}

}  // namespace covsteer
