// Acceptance suite: one PASS/FAIL line per criterion, exit status = number of failures.

#include "covsteer/controllability.hpp"
#include "covsteer/riccati.hpp"
#include "covsteer/sde_sim.hpp"
#include "covsteer/steering.hpp"
#include "covsteer/transition.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

using namespace covsteer;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

Matrix admissible(std::mt19937_64& rng, const BoundaryMap& map, double scale) {
  for (;;) {
    const Matrix x = oracle::random_symmetric(rng, map.n(), scale);
    if (map.admissibility(x) < -0.1) return x;
  }
}

Outcome symplectic_suite() {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const SystemSpec s = oracle::random_system(rng, 1 + k % 3, 2);
    const double a = u(rng), b = u(rng);
    worst = std::max(worst, symplectic_residuals(s, transition_blocks(s, std::max(a, b), std::min(a, b))).max());
  }
  return {worst <= 1e-8, fmt("max residual %.2e over 20 systems", worst)};
}

Outcome monotonicity_suite() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 50; ++k) {
    const SystemSpec s = oracle::random_system(rng, 1 + k % 3, 2);
    double x[3] = {u(rng), u(rng), u(rng)};
    std::sort(x, x + 3);
    if (x[1] - x[0] < 1e-3) x[1] = x[0] + 1e-3;
    if (x[2] - x[1] < 1e-3) x[2] = x[1] + 1e-3;
    const Matrix g1 = transition_blocks(s, x[1], x[0]).controllability_gramian();
    const Matrix g2 = transition_blocks(s, x[2], x[0]).controllability_gramian();
    worst = std::min(worst, loewner_margin(g2, g1));
  }
  return {worst > -1e-10, fmt("min eigenvalue of the difference %.2e over 50 triples", worst)};
}

Outcome closed_form_suite() {
  std::mt19937_64 rng(1003);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int n = 1 + k % 3;
    const SystemSpec s = oracle::random_system(rng, n, 2);
    Matrix pi0 = 0.2 * oracle::random_symmetric(rng, n, 1.0);
    if (!existence_check(s, 0.0, pi0).exists) pi0.setZero();
    const Matrix ref = oracle::rk4([&](double t, const Matrix& p) { return oracle::riccati_rhs(s, t, p); }, pi0, 0, 1, 4000);
    worst = std::max(worst, max_abs(solve_closed_form(s, 0.0, pi0, 1.0) - ref));
  }
  return {worst <= 1e-7, fmt("max disagreement %.2e over 20 instances", worst)};
}

Outcome maximal_interval_check() {
  const auto mi = maximal_interval(oracle::s1(), 0.0, m1(2.0), {-1.0, 2.0});
  return {std::abs(mi.t1 - 0.5) <= 1e-6 && !mi.t1_window_exceeded, fmt("t1 = %.9f (analytic 0.5)", mi.t1)};
}

Outcome jacobian_check() {
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const SystemSpec s = oracle::random_system(rng, 2, 1);
    const Matrix sigma0 = oracle::random_spd(rng, 2);
    const BoundaryMap map(s, sigma0);
    const Matrix pi0 = admissible(rng, map, 0.5);
    const Matrix jac = map.jacobian(pi0).jac;
    const Matrix dir = oracle::random_symmetric(rng, 2, 1.0);
    const double h = 1e-3;
    auto f = [&](double a) { return map(pi0 + a * dir); };
    const Matrix fd = (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
    const Matrix lin = unvec(jac * vec(dir), 2);
    worst = std::max(worst, (lin - fd).norm() / lin.norm());
  }
  const double scalar = jacobian_f(oracle::s1(), m1(1), m1(0)).jac(0, 0);
  return {worst <= 1e-5 && std::abs(scalar + 3.0) <= 1e-9,
          fmt("max relative error %.2e over 10 instances; scalar value %.12f", worst, scalar)};
}

Outcome special_case_check() {
  std::mt19937_64 rng(1006);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    SystemSpec s = oracle::random_system(rng, 1 + k % 2, 1);
    s.C = s.B;
    s.q = s.p;
    s.D = MatrixPoly::constant(s.R(0).inverse());
    const BoundaryData bd{oracle::random_spd(rng, s.n), oracle::random_spd(rng, s.n)};
    worst = std::max(worst, (map_f(s, bd.Sigma0, special_case_pi0(s, bd)) - bd.Sigma1).norm());
  }
  const double a = special_case_pi0(oracle::s1(), {m1(1), m1(2)})(0, 0);
  const double b = special_case_pi0(oracle::s1(), {m1(1), m1(0.5)})(0, 0);
  const bool scalars = std::abs(a) <= 1e-7 && std::abs(b - 0.6339746) <= 1e-7;
  return {worst <= 1e-7 && scalars, fmt("max residual %.2e over 10 instances; scalar roots %.9f, %.9f", worst, a, b)};
}

Outcome round_trip_check() {
  std::mt19937_64 rng(1007);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const SystemSpec s = oracle::random_system(rng, 2, 1);
    const Matrix sigma0 = oracle::random_spd(rng, 2);
    const BoundaryMap map(s, sigma0);
    const Matrix pi0 = admissible(rng, map, 0.8);
    worst = std::max(worst, max_abs(solve_boundary(s, {sigma0, map(pi0)}).Pi0 - pi0));
  }
  return {worst <= 1e-6, fmt("max anchor error %.2e over 10 anchors", worst)};
}

Outcome example_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const SystemSpec s = oracle::example();
  const auto sol = solve_boundary(s, {Matrix::Identity(2, 2), oracle::example_sigma1()});
  const auto traj = propagate_covariance(s, sol.Pi0, Matrix::Identity(2, 2), 101);
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& sg : traj.sigma) lo = std::min(lo, min_eigenvalue(sg));
  const double err = max_abs(traj.sigma.back() - oracle::example_sigma1());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {sol.residual <= 1e-8 && err <= 1e-6 && lo > 0 && secs < 60,
          fmt("residual %.2e, Sigma(1) error %.2e, min eigenvalue %.3f, %.2f s", sol.residual, err, lo, secs)};
}

Outcome monte_carlo_certification() {
  const auto t0 = std::chrono::steady_clock::now();
  const SystemSpec s = oracle::example();
  SteeringOptions o;
  o.grid_size = 1001;
  const auto sol = solve_boundary(s, {Matrix::Identity(2, 2), oracle::example_sigma1()}, o);
  NoiseModel nm;
  nm.q = 1;
  nm.additive.push_back({0, NoiseKind::compound_poisson, MatrixPoly::scalar({3.0, 1.0}), 0.5});
  nm.multiplicative.push_back({0, NoiseKind::wiener, MatrixPoly::scalar({1.0}), 0.0});
  SimulationConfig cfg;
  cfg.num_paths = 100000;
  cfg.step_size = 1e-3;
  cfg.master_seed = 20260101;
  cfg.Sigma0 = Matrix::Identity(2, 2);
  const auto r = simulate_paths(s, nm, {sol.times, sol.gain}, cfg);
  const Moments m = empirical_moments(r, 1.0);
  const double cov_rel = (m.cov - oracle::example_sigma1()).norm() / oracle::example_sigma1().norm();
  const double sigma_max = std::sqrt(max_eigenvalue(m.cov));
  const double mean_ratio = m.mean.norm() / (3 * sigma_max / std::sqrt(double(m.count)));
  const double jumps = std::abs(r.jump_count.mean(0) - 3.5) / 3.5;
  const CostEstimate c = estimate_cost(s, r);
  const double cost_rel = std::abs(c.mean - sol.optimal_cost) / sol.optimal_cost;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = cov_rel <= 0.05 && mean_ratio <= 1.0 && jumps <= 0.02 && cost_rel <= 0.05 && secs < 300;
  return {pass, fmt("cov %.2f%%, mean %.2f of bound, jumps %.2f%%, cost %.2f%%", 100 * cov_rel, mean_ratio, 100 * jumps,
                    100 * cost_rel) +
                    fmt(", %.1f s", secs)};
}

Outcome gramian_check() {
  std::mt19937_64 rng(1010);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    SystemSpec s = oracle::random_system(rng, 1 + k % 3, 1);
    s.Q = MatrixPoly::constant(oracle::random_spd(rng, s.n));
    worst = std::max(worst, gramian_identity(s, 0.0, Matrix::Zero(s.n, s.n), 0.8).residual);
  }
  const auto g = gramian_identity(oracle::s1(), 0.0, m1(0), 1.0);
  const bool hand = std::abs(g.mbar(0, 0) - 1.0) <= 1e-7 && std::abs(g.rhs(0, 0) - 1.0) <= 1e-7;
  return {worst <= 1e-7 && hand, fmt("max residual %.2e over 10 instances; scalar mbar %.9f", worst, g.mbar(0, 0))};
}

Outcome constructive_check() {
  struct Case {
    Matrix A, B;
    MatrixPoly M, nu;
    BoundaryData bd;
  };
  Matrix a2 = Matrix::Zero(2, 2);
  a2(0, 1) = 1;
  const Matrix b2 = (Matrix(2, 1) << 0, 1).finished();
  Matrix s12 = Matrix::Identity(2, 2);
  s12(0, 0) = 2;
  const std::vector<Case> cases{
      {m1(0), m1(1), MatrixPoly::constant(m1(1)), MatrixPoly::scalar({0}), {m1(1), m1(1)}},
      {m1(0), m1(1), MatrixPoly::constant(m1(1)), MatrixPoly::scalar({0}), {m1(1), m1(2)}},
      {a2, b2, MatrixPoly::constant(Matrix::Identity(2, 2)), MatrixPoly::scalar({0}), {Matrix::Identity(2, 2), s12}},
  };
  double worst = 0.0, lo = std::numeric_limits<double>::infinity();
  for (const auto& c : cases) {
    const auto fs = construct_feasible_steering(c.A, c.B, c.bd, c.M, c.nu, 0);
    double case_lo = 0;
    const Matrix end = oracle::lyapunov_rk4([&](double t) { return Matrix(c.A + c.B * fs.K(t)); },
                                            [&](double t) { return c.M(t); }, [&](double t) { return c.nu(t)(0, 0); },
                                            c.bd.Sigma0, 4000, &case_lo);
    worst = std::max(worst, max_abs(end - c.bd.Sigma1));
    lo = std::min(lo, case_lo);
  }
  ScalarSteeringProblem p;
  p.f = [](double, int order) { return Jet(order, 1.0); };
  p.gamma = 1;
  p.alpha = {0};
  p.beta = {0};
  p.rho = [](double) { return -1.0; };
  const auto u = scalar_steering_u(p);
  double shape = 0;
  for (double t : uniform_grid(101)) shape = std::max(shape, std::abs(u(t) - 6 * t * (1 - t)));
  return {worst <= 1e-6 && lo > 0 && shape <= 1e-12,
          fmt("endpoint error %.2e, min eigenvalue %.3f, |u - 6t(1-t)| %.1e", worst, lo, shape)};
}

Outcome classification_check() {
  const auto r = classify(oracle::example());
  SystemSpec zero = oracle::example();
  zero.B = MatrixPoly::zero(2, 1);
  const auto z = classify(zero);
  const bool pass = r.uniformly_controllable && r.totally_controllable && r.index_invariant &&
                    !z.totally_controllable && !z.uniformly_controllable;
  return {pass, std::string("example pair uniform/total/index-invariant = ") + (r.uniformly_controllable ? "yes" : "no") +
                    "/" + (r.totally_controllable ? "yes" : "no") + "/" + (r.index_invariant ? "yes" : "no") +
                    "; B = 0 controllable = " + (z.totally_controllable ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"symplectic identities", symplectic_suite},
      {"Gramian monotonicity", monotonicity_suite},
      {"Riccati closed form vs integration", closed_form_suite},
      {"maximal interval of existence", maximal_interval_check},
      {"Jacobian vs finite differences", jacobian_check},
      {"special-case closed form", special_case_check},
      {"boundary solve round trip", round_trip_check},
      {"example end-to-end solve", example_end_to_end},
      {"example Monte Carlo certification", monte_carlo_certification},
      {"Gramian identity", gramian_check},
      {"constructive controllability", constructive_check},
      {"controllability classification", classification_check},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
