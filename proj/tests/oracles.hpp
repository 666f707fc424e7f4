#pragma once

// Reference systems and independent numerical oracles shared by the tests.

#include "covsteer/controllability.hpp"
#include "covsteer/matfun.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <functional>
#include <random>

namespace oracle {

using covsteer::Matrix;
using covsteer::MatrixPoly;
using covsteer::SystemSpec;
using covsteer::Vector;

inline MatrixPoly c1(double v) { return MatrixPoly::constant(Matrix::Constant(1, 1, v)); }

// A = 0, B = 1, C = 1, D = 1, R = 1, Q = 0, nu = 0.
inline SystemSpec s1() {
  SystemSpec s;
  s.n = s.p = s.q = 1;
  s.A = c1(0);
  s.B = c1(1);
  s.C = c1(1);
  s.D = c1(1);
  s.nu = c1(0);
  s.Q = c1(0);
  s.R = c1(1);
  return s;
}

inline Matrix example_A() { return (Matrix(2, 2) << -2, 1, 0, 0).finished(); }
inline Matrix example_B() { return (Matrix(2, 1) << 0, 1).finished(); }
inline Matrix example_sigma1() { return (Matrix(2, 2) << 0.3, 0, 0, 0.2).finished(); }

// Jump channel with rate 3 + t and jump std 0.5; multiplicative unit Wiener.
inline SystemSpec example() {
  SystemSpec s;
  s.n = 2;
  s.p = 1;
  s.q = 1;
  s.A = MatrixPoly::constant(example_A());
  s.B = MatrixPoly::constant(example_B());
  s.C = MatrixPoly::constant((Matrix(2, 1) << 1, 0).finished());
  s.D = MatrixPoly::scalar({0.75, 0.25});
  s.nu = MatrixPoly::scalar({0.5});
  s.Q = MatrixPoly::constant((Matrix(2, 2) << 1, 0, 0, 0).finished());
  s.R = MatrixPoly::constant(Matrix::Identity(1, 1));
  return s;
}

inline MatrixPoly random_poly(std::mt19937_64& rng, int rows, int cols, int degree, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<std::vector<double>> c(rows * cols);
  for (auto& e : c) {
    e.resize(degree + 1);
    for (auto& x : e) x = g(rng);
  }
  return MatrixPoly(rows, cols, std::move(c));
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Matrix random_spd(std::mt19937_64& rng, int n, double floor = 0.5) {
  const Matrix g = random_matrix(rng, n, n, 0.5);
  return g * g.transpose() + floor * Matrix::Identity(n, n);
}

inline Matrix random_symmetric(std::mt19937_64& rng, int n, double scale) {
  const Matrix g = random_matrix(rng, n, n, scale);
  return 0.5 * (g + g.transpose());
}

// Random polynomial system of degree <= `degree`, resampled until the
// controllability classifier reports total controllability.
inline SystemSpec random_system(std::mt19937_64& rng, int n, int degree) {
  std::uniform_int_distribution<int> pick_p(1, n);
  for (;;) {
    SystemSpec s;
    s.n = n;
    s.p = pick_p(rng);
    s.q = n;
    s.A = random_poly(rng, n, n, degree, 0.6);
    s.B = random_poly(rng, n, s.p, degree, 0.8);
    s.C = MatrixPoly::constant(Matrix::Identity(n, n));
    const Matrix cd = random_matrix(rng, n, n, 0.4);
    s.D = MatrixPoly::constant(cd * cd.transpose());
    const MatrixPoly lq = random_poly(rng, n, n, degree / 2, 0.5);
    s.Q = lq * lq.transpose();
    s.R = MatrixPoly::constant(random_spd(rng, s.p, 1.0));
    std::uniform_real_distribution<double> u(0.0, 0.5);
    s.nu = MatrixPoly::scalar({u(rng)});
    if (covsteer::classify(s, 21, 3).totally_controllable) return s;
  }
}

// Classical fixed-step RK4 for dY/dt = f(t, Y).
inline Matrix rk4(const std::function<Matrix(double, const Matrix&)>& f, Matrix y, double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const Matrix k1 = f(t, y);
    const Matrix k2 = f(t + h / 2, y + h / 2 * k1);
    const Matrix k3 = f(t + h / 2, y + h / 2 * k2);
    const Matrix k4 = f(t + h, y + h * k3);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

// Reduced Riccati right-hand side with Abar = A + nu I.
inline Matrix riccati_rhs(const SystemSpec& s, double t, const Matrix& pi) {
  const Matrix a = s.A(t) + s.nu(t)(0, 0) * Matrix::Identity(s.n, s.n);
  const Matrix b = s.B(t);
  const Matrix bb = b * s.R(t).inverse() * b.transpose();
  return -a.transpose() * pi - pi * a + pi * bb * pi - s.Q(t);
}

// Hamiltonian transition matrix by RK4 on the 2n x 2n system.
inline Matrix hamiltonian_rk4(const SystemSpec& s, double t, double t0, int steps) {
  const int n = s.n;
  auto f = [&](double tau, const Matrix& phi) {
    const Matrix a = s.A(tau) + s.nu(tau)(0, 0) * Matrix::Identity(n, n);
    const Matrix b = s.B(tau);
    Matrix m(2 * n, 2 * n);
    m << a, -b * s.R(tau).inverse() * b.transpose(), -s.Q(tau), -a.transpose();
    return Matrix(m * phi);
  };
  return rk4(f, Matrix::Identity(2 * n, 2 * n), t0, t, steps);
}

// Lyapunov equation dSigma/dt = Acl Sigma + Sigma Acl' + M + 2 nu Sigma.
inline Matrix lyapunov_rk4(const std::function<Matrix(double)>& acl, const std::function<Matrix(double)>& m,
                           const std::function<double(double)>& nu, const Matrix& sigma0, int steps,
                           double* min_eig = nullptr) {
  auto f = [&](double t, const Matrix& s) {
    const Matrix a = acl(t);
    return Matrix(a * s + s * a.transpose() + m(t) + 2 * nu(t) * s);
  };
  Matrix s = sigma0;
  double lo = covsteer::min_eigenvalue(s);
  const int chunks = 100;
  for (int c = 0; c < chunks; ++c) {
    s = rk4(f, s, double(c) / chunks, double(c + 1) / chunks, steps / chunks);
    lo = std::min(lo, covsteer::min_eigenvalue(0.5 * (s + s.transpose())));
  }
  if (min_eig) *min_eig = lo;
  return s;
}

}  // namespace oracle
