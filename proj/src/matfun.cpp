#include "covsteer/matfun.hpp"

#include "covsteer/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace covsteer {
namespace {

double eval_poly(const std::vector<double>& c, double t, int order) {
  const int deg = static_cast<int>(c.size()) - 1;
  if (order > deg) return 0.0;
  double acc = 0.0;
  for (int k = deg; k >= order; --k) {
    double falling = 1.0;
    for (int j = 0; j < order; ++j) falling *= static_cast<double>(k - j);
    acc = acc * t + c[k] * falling;
  }
  return acc;
}

std::vector<double> trim(std::vector<double> c) {
  while (c.size() > 1 && c.back() == 0.0) c.pop_back();
  if (c.empty()) c.push_back(0.0);
  return c;
}

std::vector<double> poly_add(const std::vector<double>& a, const std::vector<double>& b, double sb) {
  std::vector<double> out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) out[k] += a[k];
  for (std::size_t k = 0; k < b.size(); ++k) out[k] += sb * b[k];
  return trim(std::move(out));
}

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return trim(std::move(out));
}

}  // namespace

MatrixPoly::MatrixPoly(int rows, int cols, std::vector<std::vector<double>> coeffs)
    : rows_(rows), cols_(cols), coeffs_(std::move(coeffs)) {
  if (rows <= 0 || cols <= 0) throw DimensionError("MatrixPoly needs positive dimensions");
  if (static_cast<int>(coeffs_.size()) != rows * cols) {
    throw DimensionError("MatrixPoly: expected " + std::to_string(rows * cols) +
                         " coefficient lists, got " + std::to_string(coeffs_.size()));
  }
  for (const auto& c : coeffs_) {
    if (c.empty()) throw DimensionError("MatrixPoly: empty coefficient list");
  }
}

MatrixPoly MatrixPoly::constant(const Matrix& value) {
  std::vector<std::vector<double>> c;
  c.reserve(value.size());
  for (int i = 0; i < value.rows(); ++i)
    for (int j = 0; j < value.cols(); ++j) c.push_back({value(i, j)});
  return MatrixPoly(static_cast<int>(value.rows()), static_cast<int>(value.cols()), std::move(c));
}

MatrixPoly MatrixPoly::zero(int rows, int cols) { return constant(Matrix::Zero(rows, cols)); }

MatrixPoly MatrixPoly::identity(int n) { return constant(Matrix::Identity(n, n)); }

MatrixPoly MatrixPoly::scalar(std::vector<double> coeffs) { return MatrixPoly(1, 1, {std::move(coeffs)}); }

int MatrixPoly::degree() const {
  int deg = 0;
  for (const auto& c : coeffs_) {
    for (int k = static_cast<int>(c.size()) - 1; k > deg; --k) {
      if (c[k] != 0.0) {
        deg = k;
        break;
      }
    }
  }
  return deg;
}

Matrix MatrixPoly::evaluate(double t, int order) const {
  Matrix out(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out(i, j) = eval_poly(entry(i, j), t, order);
  return out;
}

std::vector<Matrix> MatrixPoly::taylor(double t, int order) const {
  std::vector<Matrix> out;
  out.reserve(order + 1);
  double factorial = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) factorial *= k;
    out.push_back(evaluate(t, k) / factorial);
  }
  return out;
}

MatrixPoly MatrixPoly::derivative() const {
  std::vector<std::vector<double>> c;
  c.reserve(coeffs_.size());
  for (const auto& e : coeffs_) {
    std::vector<double> d;
    for (std::size_t k = 1; k < e.size(); ++k) d.push_back(static_cast<double>(k) * e[k]);
    c.push_back(trim(std::move(d)));
  }
  return MatrixPoly(rows_, cols_, std::move(c));
}

MatrixPoly MatrixPoly::antiderivative() const {
  std::vector<std::vector<double>> c;
  c.reserve(coeffs_.size());
  for (const auto& e : coeffs_) {
    std::vector<double> d(e.size() + 1, 0.0);
    for (std::size_t k = 0; k < e.size(); ++k) d[k + 1] = e[k] / static_cast<double>(k + 1);
    c.push_back(trim(std::move(d)));
  }
  return MatrixPoly(rows_, cols_, std::move(c));
}

MatrixPoly MatrixPoly::transpose() const {
  std::vector<std::vector<double>> c;
  c.reserve(coeffs_.size());
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < rows_; ++i) c.push_back(entry(i, j));
  return MatrixPoly(cols_, rows_, std::move(c));
}

MatrixPoly operator+(const MatrixPoly& a, const MatrixPoly& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw DimensionError("MatrixPoly sum: shape mismatch");
  std::vector<std::vector<double>> c;
  for (std::size_t k = 0; k < a.coeffs_.size(); ++k) c.push_back(poly_add(a.coeffs_[k], b.coeffs_[k], 1.0));
  return MatrixPoly(a.rows_, a.cols_, std::move(c));
}

MatrixPoly operator-(const MatrixPoly& a, const MatrixPoly& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw DimensionError("MatrixPoly difference: shape mismatch");
  std::vector<std::vector<double>> c;
  for (std::size_t k = 0; k < a.coeffs_.size(); ++k) c.push_back(poly_add(a.coeffs_[k], b.coeffs_[k], -1.0));
  return MatrixPoly(a.rows_, a.cols_, std::move(c));
}

MatrixPoly operator*(const MatrixPoly& a, const MatrixPoly& b) {
  if (a.cols_ != b.rows_) throw DimensionError("MatrixPoly product: inner dimensions differ");
  std::vector<std::vector<double>> c;
  c.reserve(static_cast<std::size_t>(a.rows_) * b.cols_);
  for (int i = 0; i < a.rows_; ++i) {
    for (int j = 0; j < b.cols_; ++j) {
      std::vector<double> acc{0.0};
      for (int k = 0; k < a.cols_; ++k) acc = poly_add(acc, poly_mul(a.entry(i, k), b.entry(k, j)), 1.0);
      c.push_back(std::move(acc));
    }
  }
  return MatrixPoly(a.rows_, b.cols_, std::move(c));
}

MatrixPoly operator*(double s, const MatrixPoly& a) {
  std::vector<std::vector<double>> c = a.coeffs_;
  for (auto& e : c) {
    for (auto& x : e) x *= s;
    e = trim(std::move(e));
  }
  return MatrixPoly(a.rows_, a.cols_, std::move(c));
}

Matrix kron(const Matrix& x, const Matrix& y) {
  Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
  return out;
}

Vector vec(const Matrix& h) { return Eigen::Map<const Vector>(h.data(), h.size()); }

Matrix unvec(const Vector& v, int rows) {
  if (rows <= 0 || v.size() % rows != 0) throw DimensionError("unvec: length is not a multiple of rows");
  return Eigen::Map<const Matrix>(v.data(), rows, v.size() / rows);
}

namespace {

bool is_identity_channel(const MultiplicativeChannel& ch) {
  if (!ch.E.is_constant() || ch.E.rows() != ch.E.cols()) return false;
  return ch.E(0.0).isApprox(Matrix::Identity(ch.E.rows(), ch.E.cols()), 0.0);
}

}  // namespace

double SystemSpec::effective_nu(double t) const {
  double total = nu(t)(0, 0);
  for (const auto& ch : channels) {
    if (is_identity_channel(ch)) total += ch.nu(t)(0, 0);
  }
  return total;
}

bool SystemSpec::has_general_channels() const {
  return std::any_of(channels.begin(), channels.end(),
                     [](const MultiplicativeChannel& ch) { return !is_identity_channel(ch); });
}

Matrix SystemSpec::noise_intensity(double t) const {
  Matrix c = C(t);
  return symmetrize(c * D(t) * c.transpose());
}

void check_boundary(const BoundaryData& bd, int n) {
  for (const auto* m : {&bd.Sigma0, &bd.Sigma1}) {
    const char* name = m == &bd.Sigma0 ? "Sigma0" : "Sigma1";
    if (m->rows() != n || m->cols() != n) {
      throw DimensionError(std::string(name) + " must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (max_abs(*m - m->transpose()) > 1e-10 * std::max(1.0, max_abs(*m))) {
      throw PreconditionError(std::string(name) + " is not symmetric");
    }
    if (min_eigenvalue(symmetrize(*m)) <= 0.0) {
      throw PreconditionError(std::string(name) + " is not positive definite");
    }
  }
}

namespace {

void expect_shape(const MatrixPoly& m, int rows, int cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(name) + " declared " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " but given " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace

void check_dimensions(const SystemSpec& sys) {
  if (sys.n <= 0 || sys.p <= 0 || sys.q <= 0) throw DimensionError("n, p, q must be positive");
  expect_shape(sys.A, sys.n, sys.n, "A");
  expect_shape(sys.B, sys.n, sys.p, "B");
  expect_shape(sys.C, sys.n, sys.q, "C");
  expect_shape(sys.D, sys.q, sys.q, "D");
  expect_shape(sys.nu, 1, 1, "nu");
  expect_shape(sys.Q, sys.n, sys.n, "Q");
  expect_shape(sys.R, sys.p, sys.p, "R");
  for (std::size_t i = 0; i < sys.channels.size(); ++i) {
    expect_shape(sys.channels[i].E, sys.n, sys.n, "E_i");
    expect_shape(sys.channels[i].nu, 1, 1, "nu_i");
  }
}

ValidationReport validate_system(const SystemSpec& sys, int grid_points) {
  check_dimensions(sys);
  ValidationReport report;
  report.grid_points = grid_points;

  auto note = [&report](const std::string& field, double t, const std::string& what) {
    for (const auto& issue : report.issues)
      if (issue.field == field) return;  // first offending time only
    report.issues.push_back({field, t, field + " " + what + " at t=" + format_double(t)});
  };
  auto check_sym = [&](const MatrixPoly& m, const std::string& field, double t, bool definite) {
    Matrix v = m(t);
    if (max_abs(v - v.transpose()) > 1e-10 * std::max(1.0, max_abs(v))) {
      note(field, t, "not symmetric");
      return;
    }
    double lo = min_eigenvalue(symmetrize(v));
    if (definite && !(lo > kPositiveDefiniteFloor)) note(field, t, "not positive definite");
    if (!definite && !(lo > kSemidefiniteFloor)) note(field, t, "not positive semidefinite");
  };

  for (double t : uniform_grid(grid_points)) {
    check_sym(sys.R, "R", t, true);
    check_sym(sys.Q, "Q", t, false);
    check_sym(sys.D, "D", t, false);
    if (!(sys.nu(t)(0, 0) > kSemidefiniteFloor)) note("nu", t, "negative");
    for (std::size_t i = 0; i < sys.channels.size(); ++i) {
      if (!(sys.channels[i].nu(t)(0, 0) > kSemidefiniteFloor)) note("nu_" + std::to_string(i + 1), t, "negative");
    }
  }
  return report;
}

std::vector<double> uniform_grid(int n) {
  if (n < 2) throw DimensionError("grid needs at least two points");
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = static_cast<double>(i) / (n - 1);
  grid.back() = 1.0;
  return grid;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace covsteer
