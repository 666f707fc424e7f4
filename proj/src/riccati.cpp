#include "covsteer/riccati.hpp"

#include "covsteer/errors.hpp"

#include <cmath>
#include <limits>

namespace covsteer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

ExistenceVerdict existence_check(const PiBounds& bounds, const Matrix& pi_s) {
  ExistenceVerdict v;
  const Matrix pi = symmetrize(pi_s);
  v.upper_margin = kInf;
  v.lower_margin = kInf;
  if (const Matrix* up = finite_bound(bounds.upper)) v.upper_margin = loewner_margin(*up, pi);
  if (const Matrix* lo = finite_bound(bounds.lower)) v.lower_margin = loewner_margin(pi, *lo);
  v.exists = v.upper_margin > 0.0 && v.lower_margin > 0.0;
  return v;
}

ExistenceVerdict existence_check(const SystemSpec& sys, double s, const Matrix& pi_s, const OdeTolerance& tol) {
  return existence_check(pi_bounds(sys, s, tol), pi_s);
}

Matrix closed_form(const TransitionBlocks& b, const Matrix& pi_s) {
  const Matrix right = b.phi11 + b.phi12 * pi_s;
  // Scale-aware test: a 1x1 denominator has condition number one however close to zero it is.
  const double scale = b.phi11.norm() + b.phi12.norm() * pi_s.norm();
  const double smallest = Eigen::JacobiSVD<Matrix>(right).singularValues().minCoeff();
  Matrix inv;
  try {
    if (!(smallest > 1e-10 * scale)) throw SingularMatrixError("phi11 + phi12 Pi is singular");
    inv = checked_inverse(right, "phi11 + phi12 Pi");
  } catch (const SingularMatrixError&) {
    throw NonexistenceError("Riccati solution does not exist at t=" + format_double(b.t) +
                            " from the anchor at s=" + format_double(b.s));
  }
  return symmetrize((b.phi21 + b.phi22 * pi_s) * inv);
}

Matrix solve_closed_form(const SystemSpec& sys, double s, const Matrix& pi_s, double t, const OdeTolerance& tol) {
  if (t == s) return pi_s;
  return closed_form(transition_blocks(sys, t, s, tol), symmetrize(pi_s));
}

namespace {

// Smallest eigenvalue of -phi12^{-1} phi11 - Pi_s (forward) or its negative
// (backward). Positive while the solution exists; decreases monotonically
// away from s.
double interval_margin(const HamiltonianFlow& flow, const Matrix& pi_s, double t, bool forward) {
  TransitionBlocks b = flow.blocks(t);
  Matrix crit;
  try {
    crit = symmetrize(-checked_inverse(b.phi12, "phi12(t,s)") * b.phi11);
  } catch (const SingularMatrixError&) {
    return kInf;
  }
  return forward ? loewner_margin(crit, pi_s) : loewner_margin(pi_s, crit);
}

double locate_end(const HamiltonianFlow& flow, const Matrix& pi_s, double s, double limit, bool& exceeded) {
  const bool forward = limit > s;
  exceeded = false;
  if (limit == s) {
    exceeded = true;
    return s;
  }
  constexpr int kScan = 64;
  double inside = s;
  double outside = limit;
  bool found = false;
  for (int k = 1; k <= kScan; ++k) {
    const double t = s + (limit - s) * k / kScan;
    if (interval_margin(flow, pi_s, t, forward) <= 0.0) {
      outside = t;
      found = true;
      break;
    }
    inside = t;
  }
  if (!found) {
    exceeded = true;
    return limit;
  }
  while (std::abs(outside - inside) > kIntervalBisectionTol) {
    const double mid = 0.5 * (inside + outside);
    if (interval_margin(flow, pi_s, mid, forward) > 0.0) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return 0.5 * (inside + outside);
}

}  // namespace

MaximalInterval maximal_interval(const SystemSpec& sys, double s, const Matrix& pi_s,
                                 std::pair<double, double> window, const OdeTolerance& tol) {
  if (!(window.first <= s && s <= window.second)) {
    throw PreconditionError("anchor time lies outside the search window");
  }
  HamiltonianFlow flow(sys, s, tol);
  const Matrix pi = symmetrize(pi_s);
  MaximalInterval out;
  out.t1 = locate_end(flow, pi, s, window.second, out.t1_window_exceeded);
  out.t0 = locate_end(flow, pi, s, window.first, out.t0_window_exceeded);
  return out;
}

RiccatiSolution riccati_grid(const SystemSpec& sys, double s, const Matrix& pi_s, int grid_size, bool with_bounds,
                             const OdeTolerance& tol) {
  RiccatiSolution sol;
  sol.anchor_time = s;
  sol.anchor_value = symmetrize(pi_s);
  sol.times = uniform_grid(grid_size);
  auto norm = std::make_shared<const NormalizedSystem>(sys);
  HamiltonianFlow flow(norm, s, tol);
  try {
    for (double t : sol.times) {
      sol.values.push_back(t == s ? sol.anchor_value : closed_form(flow.blocks(t), sol.anchor_value));
    }
  } catch (const NonexistenceError&) {
    sol.exists = false;
    sol.escape_time = sol.times[sol.values.size()];
    sol.times.resize(sol.values.size());
    return sol;
  }
  if (with_bounds) {
    for (double t : sol.times) sol.bounds.push_back(pi_bounds(HamiltonianFlow(norm, t, tol)));
  }
  return sol;
}

RiccatiSolution integrate_general(const SystemSpec& sys, const Matrix& pi0, int grid_size, const OdeTolerance& tol) {
  const int n = sys.n;
  auto norm = std::make_shared<const NormalizedSystem>(sys);
  std::vector<MultiplicativeChannel> general;
  for (const auto& ch : sys.channels) {
    if (!(ch.E.is_constant() && ch.E(0.0).isApprox(Matrix::Identity(n, n), 0.0))) general.push_back(ch);
  }
  OdeRhs rhs = [norm, general, n](double t, const Vector& y, Vector& dy) {
    Eigen::Map<const Matrix> pi(y.data(), n, n);
    Eigen::Map<Matrix> out(dy.data(), n, n);
    const Matrix a = norm->a(t);
    out = -a.transpose() * pi - pi * a + pi * norm->bbt(t) * pi - norm->q(t);
    for (const auto& ch : general) {
      const Matrix e = ch.E(t);
      out -= 2.0 * ch.nu(t)(0, 0) * e.transpose() * pi * e;
    }
  };
  OdeOptions opt;
  opt.tol = tol;
  opt.blowup_norm = kBlowupNorm;
  opt.project = [n](Vector& y) {
    Eigen::Map<Matrix> pi(y.data(), n, n);
    pi = symmetrize(pi).eval();
  };

  RiccatiSolution sol;
  sol.anchor_time = 0.0;
  sol.anchor_value = symmetrize(pi0);
  sol.times = uniform_grid(grid_size);
  DormandPrince solver(rhs, 0.0, vec(sol.anchor_value), opt);
  for (double t : sol.times) {
    if (solver.advance_to(t) != OdeStatus::ok) {
      sol.exists = false;
      sol.escape_time = solver.time();
      sol.times.resize(sol.values.size());
      return sol;
    }
    sol.values.push_back(unvec(solver.state(), n));
  }
  return sol;
}

}  // namespace covsteer
