#include "covsteer/errors.hpp"
#include "covsteer/steering.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace covsteer;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
const double kRoot = (3.0 - std::sqrt(3.0)) / 2.0;

// Random admissible anchor with some room below the upper bound.
Matrix admissible_pi0(std::mt19937_64& rng, const BoundaryMap& map, double scale) {
  for (;;) {
    const Matrix x = oracle::random_symmetric(rng, map.n(), scale);
    if (map.admissibility(x) < -0.1) return x;
  }
}

Matrix fd_map(const SystemSpec& s, const Matrix& sigma0, const Matrix& pi0, const Matrix& dir, double h) {
  auto f = [&](double a) { return map_f(s, sigma0, pi0 + a * dir); };
  return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("map_f on the scalar system") {
  const SystemSpec s = oracle::s1();
  CHECK(map_f(s, m1(1), m1(0))(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(map_f(s, m1(1), m1(kRoot))(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  for (double p : {-2.0, -0.5, 0.3, 0.9}) {
    const double want = (1 - p) * (1 - p) + (1 - p);
    CHECK(map_f(s, m1(1), m1(p))(0, 0) == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("map_f rejects inadmissible anchors") {
  CHECK_THROWS_AS(map_f(oracle::s1(), m1(1), m1(1.5)), NonexistenceError);
}

TEST_CASE("scalar map is strictly decreasing") {
  const SystemSpec s = oracle::s1();
  double prev = std::numeric_limits<double>::infinity();
  for (double p = -3.0; p < 0.99; p += 0.2) {
    const double v = map_f(s, m1(1), m1(p))(0, 0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("Jacobian at the scalar origin") {
  const auto w = jacobian_f(oracle::s1(), m1(1), m1(0));
  CHECK(w.jac(0, 0) == doctest::Approx(-3.0).epsilon(1e-9));
  const double h = 1e-4;
  const double fd = (map_f(oracle::s1(), m1(1), m1(h))(0, 0) - map_f(oracle::s1(), m1(1), m1(-h))(0, 0)) / (2 * h);
  CHECK(fd == doctest::Approx(-3.0).epsilon(1e-7));
}

TEST_CASE("Jacobian matches finite differences and has the expected block structure") {
  std::mt19937_64 rng(51);
  const SystemSpec s = oracle::random_system(rng, 2, 1);
  const Matrix sigma0 = oracle::random_spd(rng, 2);
  const BoundaryMap map(s, sigma0);
  const Matrix pi0 = admissible_pi0(rng, map, 0.5);
  const auto w = map.jacobian(pi0);

  for (int k = 0; k < 3; ++k) {
    const Matrix dir = oracle::random_symmetric(rng, 2, 1.0);
    const Matrix lin = unvec(w.jac * vec(dir), 2);
    const Matrix fd = fd_map(s, sigma0, pi0, dir, 1e-3);
    CHECK((lin - fd).norm() <= 1e-5 * lin.norm());
    CHECK(max_abs(lin - lin.transpose()) <= 1e-10 * std::max(1.0, max_abs(lin)));
  }
  CHECK(max_eigenvalue(symmetrize(w.W10)) < 0.0);
  for (std::size_t i = 0; i < w.nodes.size(); ++i)
    if (w.nodes[i] > 1e-8) CHECK(max_eigenvalue(symmetrize(w.W[i])) < 0.0);
  for (const auto& p : w.P) CHECK(min_eigenvalue(symmetrize(p)) > -1e-10);
  for (int k = 0; k < 100; ++k) {
    const Vector x = vec(oracle::random_symmetric(rng, 2, 1.0));
    CHECK(x.dot(w.S * x) < 0.0);
  }
}

TEST_CASE("solve_boundary on the scalar system") {
  const SystemSpec s = oracle::s1();
  const auto trivial = solve_boundary(s, {m1(1), m1(2)});
  CHECK(std::abs(trivial.Pi0(0, 0)) <= 1e-8);
  CHECK(trivial.optimal_cost == doctest::Approx(0.0).epsilon(1e-10));

  const auto sol = solve_boundary(s, {m1(1), m1(0.5)});
  CHECK(std::abs(sol.Pi0(0, 0) - kRoot) <= 1e-8);
  CHECK(sol.residual <= 1e-8);
  const double p = kRoot;
  CHECK(sol.optimal_cost == doctest::Approx(-std::log(1 - p) + p - 0.5 * p / (1 - p)).epsilon(1e-8));
  CHECK(sol.optimal_cost == doctest::Approx(0.7730).epsilon(1e-4));
}

TEST_CASE("solve_boundary on the example system") {
  const SystemSpec s = oracle::example();
  const auto sol = solve_boundary(s, {Matrix::Identity(2, 2), oracle::example_sigma1()});
  CHECK(sol.residual <= 1e-8);
  CHECK(max_abs(sol.sigma.back() - oracle::example_sigma1()) <= 1e-6);
  CHECK(sol.times.size() == 101);
  for (const auto& sg : sol.sigma) CHECK(min_eigenvalue(sg) > 0.0);
  for (const auto& k : sol.gain) {
    CHECK(k.rows() == 1);
    CHECK(k.cols() == 2);
  }
  const BoundaryMap map(s, Matrix::Identity(2, 2));
  CHECK(map.admissibility(sol.Pi0) < 0.0);
  CHECK(max_abs(map_f(s, Matrix::Identity(2, 2), sol.Pi0) - oracle::example_sigma1()) <= 1e-6);
}

TEST_CASE("boundary solve recovers random anchors") {
  std::mt19937_64 rng(57);
  const SystemSpec s = oracle::random_system(rng, 2, 1);
  const Matrix sigma0 = oracle::random_spd(rng, 2);
  const BoundaryMap map(s, sigma0);
  for (int k = 0; k < 5; ++k) {
    const Matrix pi0 = admissible_pi0(rng, map, 0.8);
    const Matrix sigma1 = map(pi0);
    const auto sol = solve_boundary(s, {sigma0, sigma1});
    CHECK(max_abs(sol.Pi0 - pi0) <= 1e-6);
  }
}

TEST_CASE("special case closed form") {
  const SystemSpec s = oracle::s1();
  CHECK(std::abs(special_case_pi0(s, {m1(1), m1(2)})(0, 0)) <= 1e-7);
  CHECK(special_case_pi0(s, {m1(1), m1(0.5)})(0, 0) == doctest::Approx(1.5 - std::sqrt(0.75)).epsilon(1e-9));

  std::mt19937_64 rng(61);
  SystemSpec r = oracle::random_system(rng, 2, 1);
  r.C = r.B;
  r.q = r.p;
  r.D = MatrixPoly::constant(r.R(0).inverse());
  const BoundaryData bd{oracle::random_spd(rng, 2), oracle::random_spd(rng, 2)};
  const Matrix pi0 = special_case_pi0(r, bd);
  CHECK((map_f(r, bd.Sigma0, pi0) - bd.Sigma1).norm() <= 1e-7);
  CHECK(max_abs(solve_boundary(r, bd).Pi0 - pi0) <= 1e-7);

  CHECK_THROWS_AS(special_case_pi0(oracle::example(), {Matrix::Identity(2, 2), oracle::example_sigma1()}),
                  ChannelMismatchError);
}

TEST_CASE("covariance propagation") {
  const SystemSpec s = oracle::s1();
  const auto zero = propagate_covariance(s, m1(0), m1(1), 11);
  for (std::size_t k = 0; k < zero.times.size(); ++k)
    CHECK(zero.sigma[k](0, 0) == doctest::Approx(1 + zero.times[k]).epsilon(1e-10));
  const auto opt = propagate_covariance(s, m1(kRoot), m1(1), 11);
  CHECK(opt.sigma.back()(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(opt.endpoint_check <= 1e-7);
}

TEST_CASE("feedback gain") {
  const SystemSpec s = oracle::s1();
  const std::vector<double> t{0.0, 0.5, 1.0};
  std::vector<Matrix> pi;
  for (double x : t) pi.push_back(m1(0.5 / (1 - 0.5 * x)));
  const auto k = feedback_gain(s, t, pi);
  CHECK(k.back()(0, 0) == doctest::Approx(-1.0));
  CHECK(k[1](0, 0) == doctest::Approx(-0.5 / 0.75));
  const auto z = feedback_gain(s, t, std::vector<Matrix>(3, m1(0)));
  for (const auto& g : z) CHECK(g(0, 0) == 0.0);
}

TEST_CASE("Sigma(1) shrinks toward the upper bound and grows toward -infinity") {
  const SystemSpec s = oracle::s1();
  double prev = std::numeric_limits<double>::infinity();
  for (double p : {0.0, 0.5, 0.9, 0.99, 0.999}) {
    const double v = map_f(s, m1(1), m1(p)).norm();
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 0.01);
  prev = 0.0;
  for (double c : {1.0, 10.0, 100.0, 1000.0}) {
    const double v = min_eigenvalue(map_f(s, m1(1), m1(-c)));
    CHECK(v > prev);
    prev = v;
  }
}
