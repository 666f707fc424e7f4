#include "covsteer/linalg.hpp"

#include "covsteer/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace covsteer {

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

Matrix sqrtm_psd(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(symmetric));
  Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix v = es.eigenvectors();
  return symmetrize(v * roots.asDiagonal() * v.transpose());
}

Matrix inv_sqrtm_pd(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(symmetric));
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw SingularMatrixError("inverse square root of a matrix that is not positive definite");
  }
  Vector roots = es.eigenvalues().cwiseSqrt().cwiseInverse();
  Matrix v = es.eigenvectors();
  return symmetrize(v * roots.asDiagonal() * v.transpose());
}

double condition_number(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> svd(x);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  double smallest = s(s.size() - 1);
  if (smallest == 0.0 || !std::isfinite(smallest)) return std::numeric_limits<double>::infinity();
  return s(0) / smallest;
}

Matrix checked_inverse(const Matrix& x, std::string_view what, double max_condition) {
  if (!x.allFinite() || condition_number(x) > max_condition) {
    throw SingularMatrixError(std::string(what) + " is singular (condition estimate > " +
                              std::to_string(max_condition) + ")");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  return qr.solve(Matrix::Identity(x.rows(), x.cols()));
}

}  // namespace covsteer
