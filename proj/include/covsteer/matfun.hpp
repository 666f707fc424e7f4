#pragma once

// Time-dependent matrices with polynomial entries, problem containers, and
// the Kronecker/vec helpers shared by the solver modules. The horizon is
// always [0, 1].

#include "covsteer/linalg.hpp"

#include <string>
#include <vector>

namespace covsteer {

/// Matrix whose entries are real polynomials in t, ascending-degree
/// coefficients stored per entry in row-major entry order.
class MatrixPoly {
 public:
  MatrixPoly() = default;
  MatrixPoly(int rows, int cols, std::vector<std::vector<double>> coeffs);

  static MatrixPoly constant(const Matrix& value);
  static MatrixPoly zero(int rows, int cols);
  static MatrixPoly identity(int n);
  /// Scalar polynomial sum_k c_k t^k as a 1x1 matrix.
  static MatrixPoly scalar(std::vector<double> coeffs);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  const std::vector<double>& entry(int i, int j) const { return coeffs_[i * cols_ + j]; }
  const std::vector<std::vector<double>>& coeffs() const noexcept { return coeffs_; }
  int degree() const;
  bool is_constant() const { return degree() == 0; }

  /// order-th time derivative at t.
  Matrix evaluate(double t, int order = 0) const;
  Matrix operator()(double t) const { return evaluate(t, 0); }
  /// Taylor coefficients at t: element k holds f^(k)(t) / k!.
  std::vector<Matrix> taylor(double t, int order) const;

  MatrixPoly derivative() const;
  /// Antiderivative vanishing at t = 0.
  MatrixPoly antiderivative() const;
  MatrixPoly transpose() const;

  friend MatrixPoly operator+(const MatrixPoly& a, const MatrixPoly& b);
  friend MatrixPoly operator-(const MatrixPoly& a, const MatrixPoly& b);
  friend MatrixPoly operator*(const MatrixPoly& a, const MatrixPoly& b);
  friend MatrixPoly operator*(double s, const MatrixPoly& a);
  friend MatrixPoly operator-(const MatrixPoly& a) { return -1.0 * a; }
  friend bool operator==(const MatrixPoly& a, const MatrixPoly& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.coeffs_ == b.coeffs_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::vector<double>> coeffs_;
};

/// order-th derivative of f at t.
inline Matrix evaluate(const MatrixPoly& f, double t, int order = 0) {
  return f.evaluate(t, order);
}

Matrix kron(const Matrix& x, const Matrix& y);
/// Column-stacked vectorization.
Vector vec(const Matrix& h);
Matrix unvec(const Vector& v, int rows);

/// Multiplicative channel E_i(t) dmu_i(t) x(t) with intensity dE[mu_i^2]/dt = 2 nu_i(t).
struct MultiplicativeChannel {
  MatrixPoly E;
  MatrixPoly nu;
};

struct SystemSpec {
  int n = 0;
  int p = 0;
  int q = 0;
  MatrixPoly A, B, C, D;
  /// Scalar intensity of the state-dependent channel x dmu (E = I).
  MatrixPoly nu;
  MatrixPoly Q, R;
  /// Extra channels. Those with E == I fold into nu; others need the general
  /// Riccati equation.
  std::vector<MultiplicativeChannel> channels;

  /// nu(t) plus the intensities of every identity channel.
  double effective_nu(double t) const;
  bool has_general_channels() const;
  /// C(t) D(t) C(t)^T
  Matrix noise_intensity(double t) const;
};

struct BoundaryData {
  Matrix Sigma0;
  Matrix Sigma1;
};

/// Throws PreconditionError unless both covariances are symmetric positive definite.
void check_boundary(const BoundaryData& bd, int n);

/// Shape check against (n, p, q); throws DimensionError.
void check_dimensions(const SystemSpec& sys);

struct ValidationIssue {
  std::string field;
  double time = 0.0;
  std::string message;
};

struct ValidationReport {
  int grid_points = 0;
  std::vector<ValidationIssue> issues;
  bool passed() const noexcept { return issues.empty(); }
};

inline constexpr int kValidationGrid = 101;
inline constexpr double kPositiveDefiniteFloor = 1e-12;
inline constexpr double kSemidefiniteFloor = -1e-10;

ValidationReport validate_system(const SystemSpec& sys, int grid_points = kValidationGrid);

/// n points uniformly spaced on [0, 1] (n >= 2).
std::vector<double> uniform_grid(int n);

/// Shortest round-trip decimal form of x.
std::string format_double(double x);

}  // namespace covsteer
