#include "covsteer/controllability.hpp"
#include "covsteer/errors.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace covsteer;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

Matrix canonical_A(int n) {
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
  return a;
}

Matrix canonical_B(int n) {
  Matrix b = Matrix::Zero(n, 1);
  b(n - 1, 0) = 1.0;
  return b;
}

JetFunction unit_weight() {
  return [](double, int order) { return Jet(order, 1.0); };
}

// Closed-loop re-integration of the covariance with the returned gain.
double reintegrate(const FeasibleSteering& fs, const Matrix& A, const Matrix& B, const MatrixPoly& M,
                   const MatrixPoly& nu, const BoundaryData& bd, double* min_eig) {
  const Matrix end = oracle::lyapunov_rk4([&](double t) { return Matrix(A + B * fs.K(t)); },
                                          [&](double t) { return M(t); }, [&](double t) { return nu(t)(0, 0); },
                                          bd.Sigma0, 4000, min_eig);
  return max_abs(end - bd.Sigma1);
}

}  // namespace

TEST_CASE("theta matrices") {
  const auto t1 = theta_matrices(oracle::c1(0), oracle::c1(1), 0.4, 2);
  CHECK(t1[0] == m1(1));
  CHECK(t1[1] == (Matrix(1, 2) << 1, 0).finished());

  const auto t6 = theta_matrices(oracle::example(), 0.3, 2);
  CHECK(t6[1] == (Matrix(2, 2) << 0, -1, 1, 0).finished());
  CHECK(numerical_rank(t6[1]) == 2);

  const MatrixPoly bt(2, 1, {{0, 1}, {1}});
  for (double t : {0.0, 0.5, 1.0}) {
    const auto th = theta_matrices(MatrixPoly::zero(2, 2), bt, t, 2);
    CHECK(th[1] == (Matrix(2, 2) << t, 1, 1, 0).finished());
  }
}

TEST_CASE("classify") {
  const auto r6 = classify(oracle::example());
  CHECK(r6.uniformly_controllable);
  CHECK(r6.totally_controllable);
  CHECK(r6.index_invariant);

  SystemSpec zero = oracle::example();
  zero.B = MatrixPoly::zero(2, 1);
  const auto rz = classify(zero);
  CHECK_FALSE(rz.uniformly_controllable);
  CHECK_FALSE(rz.totally_controllable);
  CHECK(rz.witnesses.empty());
  // Every rank is 0, so ranks are constant and rank Theta_n = rank Theta_{n+1}.
  CHECK(rz.index_invariant);

  const auto rt = classify(MatrixPoly::zero(2, 2), MatrixPoly(2, 1, {{0, 1}, {1}}));
  CHECK(rt.uniformly_controllable);
}

TEST_CASE("total but not uniform controllability") {
  // B(t) = [t - 1/2; 0], A = [[0,0],[1,0]] loses rank only at t = 1/2.
  const MatrixPoly a = MatrixPoly::constant((Matrix(2, 2) << 0, 0, 1, 0).finished());
  const MatrixPoly b(2, 1, {{-0.5, 1}, {0}});
  const auto r = classify(a, b);
  CHECK_FALSE(r.uniformly_controllable);
  CHECK(r.totally_controllable);
}

TEST_CASE("report invariants") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const MatrixPoly a = oracle::random_poly(rng, n, n, 2, 1.0);
    const MatrixPoly b = oracle::random_poly(rng, n, 1, trial % 2, 1.0);
    const auto r = classify(a, b, 21, 3);
    if (r.uniformly_controllable) CHECK(r.totally_controllable);
    for (const auto& ranks : r.theta_ranks)
      for (std::size_t i = 1; i < ranks.size(); ++i) CHECK(ranks[i] >= ranks[i - 1]);
  }
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = oracle::random_matrix(rng, 3, 3);
    Matrix b = oracle::random_matrix(rng, 3, 1);
    if (trial == 0) b = Matrix::Zero(3, 1);
    const int k = kalman_rank(a, b);
    for (const auto& ranks : classify(MatrixPoly::constant(a), MatrixPoly::constant(b), 11, 1).theta_ranks)
      CHECK(ranks[2] == k);
  }
}

TEST_CASE("canonical transform") {
  auto check = [](const Matrix& a, const Matrix& b) {
    const int n = static_cast<int>(a.rows());
    const CanonicalTransform ct = canonical_transform(a, b);
    const Matrix tinv = ct.T.inverse();
    CHECK(max_abs(ct.T * (a + b * ct.F) * tinv - canonical_A(n)) <= 1e-9);
    CHECK(max_abs(ct.T * b * ct.v - canonical_B(n)) <= 1e-9);
    const Matrix an = ct.T * (a + b * ct.F) * tinv;
    CHECK(classify(MatrixPoly::constant(an), MatrixPoly::constant(Matrix(ct.T * b * ct.v)), 11, 1).uniformly_controllable);
    return ct;
  };
  const auto c2 = check(canonical_A(2), canonical_B(2));
  CHECK(max_abs(c2.T - Matrix::Identity(2, 2)) <= 1e-12);
  CHECK(max_abs(c2.F) <= 1e-12);
  check(oracle::example_A(), oracle::example_B());
  check(m1(0.7), m1(-2.0));
  std::mt19937_64 rng(73);
  check(oracle::random_matrix(rng, 3, 3), oracle::random_matrix(rng, 3, 2));
  CHECK_THROWS_AS(canonical_transform(oracle::example_A(), Matrix::Zero(2, 1)), NotControllableError);
}

TEST_CASE("scalar steering construction") {
  ScalarSteeringProblem p;
  p.f = unit_weight();
  p.gamma = 1.0;
  p.alpha = {0.0};
  p.beta = {0.0};
  p.rho = [](double) { return -1.0; };
  const auto u = scalar_steering_u(p);
  CHECK(u.c0() == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(u.d0() == 0.0);
  for (double t : {0.1, 0.5, 0.8}) CHECK(u(t) == doctest::Approx(6 * t * (1 - t)).epsilon(1e-12));
  CHECK(u.integral_residual() <= 1e-9);

  p.gamma = 0.0;
  const auto z = scalar_steering_u(p);
  for (double t : {0.2, 0.6}) CHECK(z(t) == 0.0);

  p.alpha = {0.0, 1.0};
  p.beta = {0.0, -1.0};
  const auto h1 = scalar_steering_u(p);
  CHECK(std::abs(h1(0.0)) <= 1e-9);
  CHECK(std::abs(h1(1.0)) <= 1e-9);
  CHECK(h1.jet(0.0, 1)[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(h1.jet(1.0, 1)[1] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(h1.integral_residual() <= 1e-9);
}

TEST_CASE("scalar steering bump lifts the running integral above the floor") {
  ScalarSteeringProblem p;
  p.f = unit_weight();
  p.gamma = 0.0;
  p.alpha = {0.0};
  p.beta = {0.0};
  p.rho = [](double t) { return -0.01 + 0.05 * std::sin(3.14159 * t); };
  const auto u = scalar_steering_u(p);
  CHECK(u.d0() > 0.0);
  CHECK(u.floor_gap() > 0.0);
  CHECK(u.integral_residual() <= 1e-9);

  p.gamma = 20.0;
  p.rho = [](double t) { return 1e9 * t * (1 - t) - 1.0; };
  CHECK_THROWS_AS(scalar_steering_u(p), InfeasibleError);
}

TEST_CASE("feasible steering, scalar cases") {
  const Matrix one = m1(1.0);
  const MatrixPoly M = MatrixPoly::constant(one);
  const MatrixPoly nu = MatrixPoly::scalar({0.0});
  for (double target : {1.0, 2.0}) {
    const BoundaryData bd{one, m1(target)};
    const auto fs = construct_feasible_steering(m1(0.0), one, bd, M, nu, 0);
    double lo = 0;
    CHECK(reintegrate(fs, m1(0.0), one, M, nu, bd, &lo) <= 1e-6);
    CHECK(lo > 0.0);
    REQUIRE(fs.layers.size() == 1);
    CHECK(fs.layers[0].gamma == doctest::Approx(target - 2.0).epsilon(1e-12));
  }
}

TEST_CASE("feasible steering, two and three states") {
  struct Case {
    Matrix A, B;
    MatrixPoly M, nu;
    BoundaryData bd;
    int H;
  };
  Matrix s12 = Matrix::Identity(2, 2);
  s12(0, 0) = 2.0;
  Matrix s3 = 0.5 * Matrix::Identity(3, 3);
  s3(0, 0) = 2.0;
  Matrix a3 = canonical_A(3);
  a3(2, 0) = -1.0;
  const std::vector<Case> cases{
      {canonical_A(2), canonical_B(2), MatrixPoly::constant(Matrix::Identity(2, 2)), MatrixPoly::scalar({0.0}),
       {Matrix::Identity(2, 2), s12}, 0},
      {oracle::example_A(), oracle::example_B(), MatrixPoly(2, 2, {{0.75, 0.25}, {0}, {0}, {0}}), MatrixPoly::scalar({0.5}),
       {Matrix::Identity(2, 2), oracle::example_sigma1()}, 1},
      {a3, canonical_B(3), MatrixPoly::constant(0.1 * Matrix::Identity(3, 3)), MatrixPoly::scalar({0.2, 0.1}),
       {Matrix::Identity(3, 3), s3}, 0},
  };
  for (const auto& c : cases) {
    const auto fs = construct_feasible_steering(c.A, c.B, c.bd, c.M, c.nu, c.H);
    double lo = 0;
    CHECK(reintegrate(fs, c.A, c.B, c.M, c.nu, c.bd, &lo) <= 1e-6);
    CHECK(lo > 0.0);
    CHECK(fs.endpoint_error <= 1e-6);
    for (const auto& s : fs.sigma) CHECK(min_eigenvalue(s) > 0.0);
  }
}

TEST_CASE("feasible steering preconditions") {
  const BoundaryData bd{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(construct_feasible_steering(oracle::example_A(), Matrix::Zero(2, 1), bd,
                                              MatrixPoly::constant(Matrix::Identity(2, 2)), MatrixPoly::scalar({0}), 0),
                  NotControllableError);
}

TEST_CASE("closed-loop covariance stays positive for bounded gains") {
  std::mt19937_64 rng(79);
  const SystemSpec s = oracle::example();
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixPoly k = oracle::random_poly(rng, 1, 2, 2, 3.0);
    double lo = 0;
    oracle::lyapunov_rk4([&](double t) { return Matrix(s.A(t) + s.B(t) * k(t)); },
                         [&](double t) { return s.noise_intensity(t); }, [&](double t) { return s.nu(t)(0, 0); },
                         Matrix::Identity(2, 2), 1000, &lo);
    CHECK(lo > 0.0);
  }
}
