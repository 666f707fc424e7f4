#include "covsteer/steering.hpp"

#include "covsteer/errors.hpp"

#include <cmath>
#include <limits>

namespace covsteer {

namespace {

constexpr double kTinyTime = 1e-8;

Matrix upper_bound_of(const TransitionBlocks& end) {
  try {
    return symmetrize(-checked_inverse(end.phi12, "phi12(1,0)") * end.phi11);
  } catch (const SingularMatrixError&) {
    throw NotControllableError("not totally controllable: phi12(1,0) is singular");
  }
}

}  // namespace

BoundaryMap::BoundaryMap(const SystemSpec& sys, const Matrix& sigma0, const OdeTolerance& tol, const QuadOptions& quad)
    : n_(sys.n), sys_(sys), sigma0_(symmetrize(sigma0)), quad_(quad), flow_(sys, 0.0, tol),
      end_(flow_.blocks(1.0)), upper_(upper_bound_of(end_)) {}

double BoundaryMap::admissibility(const Matrix& pi0) const {
  return max_eigenvalue(symmetrize(pi0 - upper_));
}

void BoundaryMap::require_admissible(const Matrix& pi0) const {
  const double margin = admissibility(pi0);
  if (!(margin < 0.0)) {
    throw NonexistenceError("Pi0 is not below -phi12(1,0)^{-1} phi11(1,0) (margin " + format_double(margin) + ")");
  }
}

Matrix BoundaryMap::integrand(double s, const Matrix& pi0, Matrix* w) const {
  TransitionBlocks b = flow_.blocks(s);
  Matrix inv;
  try {
    inv = checked_inverse(b.phi11 + b.phi12 * pi0, "phi_Pi(s,0)");
  } catch (const SingularMatrixError&) {
    throw NonexistenceError("closed-loop transition matrix singular at s=" + format_double(s));
  }
  if (w) *w = s < kTinyTime ? Matrix::Zero(n_, n_) : Matrix(inv * b.phi12);
  return symmetrize(inv * sys_.noise_intensity(s) * inv.transpose());
}

Matrix BoundaryMap::operator()(const Matrix& pi0_in) const {
  const Matrix pi0 = symmetrize(pi0_in);
  require_admissible(pi0);
  Integrand g = [&](double s) { return vec(integrand(s, pi0, nullptr)); };
  Matrix inner = sigma0_ + unvec(integrate_adaptive(g, 0.0, 1.0, quad_).value, n_);
  Matrix phi = end_.phi11 + end_.phi12 * pi0;
  return symmetrize(phi * inner * phi.transpose());
}

JacobianWorkspace BoundaryMap::jacobian(const Matrix& pi0_in) const {
  const Matrix pi0 = symmetrize(pi0_in);
  require_admissible(pi0);
  Integrand g = [&](double s) { return vec(integrand(s, pi0, nullptr)); };
  const Partition partition = integrate_adaptive(g, 0.0, 1.0, quad_).partition;

  JacobianWorkspace ws;
  ws.phiPi10 = end_.phi11 + end_.phi12 * pi0;
  integrand(1.0, pi0, &ws.W10);
  Matrix integral = Matrix::Zero(n_, n_);
  ws.S = kron(sigma0_, ws.W10) + kron(ws.W10, sigma0_);
  for (const QuadNode& node : kronrod_nodes(partition)) {
    Matrix w;
    Matrix p = integrand(node.t, pi0, &w);
    const Matrix d = ws.W10 - w;
    ws.S += node.weight * (kron(p, d) + kron(d, p));
    integral += node.weight * p;
    ws.nodes.push_back(node.t);
    ws.weights.push_back(node.weight);
    ws.W.push_back(std::move(w));
    ws.P.push_back(std::move(p));
  }
  ws.jac = kron(ws.phiPi10, ws.phiPi10) * ws.S;
  ws.sigma1 = symmetrize(ws.phiPi10 * (sigma0_ + integral) * ws.phiPi10.transpose());
  return ws;
}

Matrix map_f(const SystemSpec& sys, const Matrix& sigma0, const Matrix& pi0) {
  return BoundaryMap(sys, sigma0)(pi0);
}

JacobianWorkspace jacobian_f(const SystemSpec& sys, const Matrix& sigma0, const Matrix& pi0) {
  return BoundaryMap(sys, sigma0).jacobian(pi0);
}

Matrix symmetric_embedding(int n) {
  Matrix e = Matrix::Zero(n * n, n * (n + 1) / 2);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i, ++k) {
      e(j * n + i, k) = 1.0;
      e(i * n + j, k) = 1.0;
    }
  }
  return e;
}

Matrix symmetric_selection(int n) {
  Matrix s = Matrix::Zero(n * (n + 1) / 2, n * n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i, ++k) s(k, j * n + i) = 1.0;
  }
  return s;
}

Matrix special_case_pi0(const SystemSpec& sys, const BoundaryData& bd, bool check_channels, const OdeTolerance& tol) {
  check_boundary(bd, sys.n);
  NormalizedSystem norm(sys);
  if (check_channels) {
    for (double t : uniform_grid(kValidationGrid)) {
      const Matrix cdc = sys.noise_intensity(t);
      const Matrix bb = norm.bbt(t);
      if (max_abs(cdc - bb) > 1e-10 * std::max(1.0, max_abs(bb))) {
        throw ChannelMismatchError("C D C' differs from B R^{-1} B' at t=" + format_double(t));
      }
    }
  }
  TransitionBlocks end = transition_blocks(sys, 1.0, 0.0, tol);
  Matrix g;
  try {
    g = checked_inverse(end.phi12, "phi12(1,0)");
  } catch (const SingularMatrixError&) {
    throw NotControllableError("not totally controllable: phi12(1,0) is singular");
  }
  const Matrix s0 = symmetrize(bd.Sigma0);
  const Matrix root = sqrtm_psd(s0);
  const Matrix inv_root = inv_sqrtm_pd(s0);
  const Matrix id = Matrix::Identity(sys.n, sys.n);
  const Matrix inner = symmetrize(0.25 * id + root * g * symmetrize(bd.Sigma1) * g.transpose() * root);
  Matrix pi0 = -g * end.phi11 + 0.5 * checked_inverse(s0, "Sigma0") - inv_root * sqrtm_psd(inner) * inv_root;
  return symmetrize(pi0);
}

namespace {

double relative_residual(const Matrix& value, const Matrix& target) {
  return (value - target).norm() / target.norm();
}

struct Stage {
  Matrix pi;
  Matrix value;
  double residual;
  bool converged;
};

// Damped Newton on the symmetric coordinates towards `target`.
Stage newton_stage(const BoundaryMap& map, const Matrix& target, Matrix pi, const SteeringOptions& opt, double theta,
                   std::vector<NewtonStep>& trace) {
  const int n = map.n();
  const Matrix emb = symmetric_embedding(n);
  const Matrix sel = symmetric_selection(n);
  JacobianWorkspace ws = map.jacobian(pi);
  double res = relative_residual(ws.sigma1, target);
  for (int it = 0;; ++it) {
    if (res <= opt.residual_tol) return {pi, ws.sigma1, res, true};
    if (it >= opt.max_iterations) break;
    const Matrix jr = sel * ws.jac * emb;
    const Vector r = sel * vec(ws.sigma1 - target);
    const Vector dx = jr.colPivHouseholderQr().solve(-r);
    const Matrix dpi = symmetrize(unvec(emb * dx, n));
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h, alpha *= 0.5) {
      const Matrix cand = symmetrize(pi + alpha * dpi);
      if (map.admissibility(cand) > -opt.admissibility_margin) continue;
      JacobianWorkspace cws;
      try {
        cws = map.jacobian(cand);
      } catch (const NonexistenceError&) {
        continue;
      }
      const double cres = relative_residual(cws.sigma1, target);
      if (cres < res) {
        pi = cand;
        ws = std::move(cws);
        res = cres;
        accepted = true;
        break;
      }
    }
    trace.push_back({static_cast<int>(trace.size()) + 1, res, accepted ? alpha : 0.0, theta});
    if (!accepted) break;
  }
  return {pi, ws.sigma1, res, false};
}

}  // namespace

SteeringSolution solve_boundary(const SystemSpec& sys, const BoundaryData& bd, const SteeringOptions& opt) {
  check_dimensions(sys);
  check_boundary(bd, sys.n);
  const ValidationReport report = validate_system(sys);
  if (!report.passed()) throw PreconditionError("system validation failed: " + report.issues.front().message);
  if (sys.has_general_channels()) {
    throw PreconditionError("boundary solve supports only identity multiplicative channels");
  }

  const BoundaryMap map(sys, bd.Sigma0, opt.tol, opt.quad);
  const Matrix sigma1 = symmetrize(bd.Sigma1);
  SteeringSolution sol;

  Matrix start = special_case_pi0(sys, bd, false, opt.tol);
  if (map.admissibility(start) > -opt.admissibility_margin) start = map.upper_bound() - Matrix::Identity(sys.n, sys.n);
  Stage stage = newton_stage(map, sigma1, start, opt, 1.0, sol.newton_trace);
  if (!stage.converged) {
    // Continuation from the reachable covariance f(Pi0) towards Sigma1.
    const Matrix base = stage.value;
    Stage best = stage;
    for (int k = 1; k <= opt.homotopy_steps; ++k) {
      const double theta = static_cast<double>(k) / opt.homotopy_steps;
      const Matrix target = (1.0 - theta) * base + theta * sigma1;
      stage = newton_stage(map, target, stage.pi, opt, theta, sol.newton_trace);
      if (!stage.converged) break;
    }
    if (stage.converged) {
      best = stage;
    } else {
      const double r = relative_residual(map(stage.pi), sigma1);
      if (r < best.residual) best = {stage.pi, map(stage.pi), r, false};
    }
    if (!best.converged) {
      throw NoConvergenceError("boundary solve did not converge; best residual " + format_double(best.residual),
                               best.residual);
    }
    stage = best;
  }

  sol.Pi0 = stage.pi;
  sol.residual = stage.residual;
  sol.times = uniform_grid(opt.grid_size);
  for (double t : sol.times) {
    sol.pi.push_back(t == 0.0 ? sol.Pi0 : closed_form(map.flow().blocks(t), sol.Pi0));
  }
  sol.gain = feedback_gain(sys, sol.times, sol.pi);
  sol.sigma = propagate_covariance(sys, sol.Pi0, bd.Sigma0, opt.grid_size, opt.tol).sigma;
  sol.optimal_cost = optimal_cost(sys, sol.Pi0, bd, opt.tol, opt.quad);
  return sol;
}

CovarianceTrajectory propagate_covariance(const SystemSpec& sys, const Matrix& pi0_in, const Matrix& sigma0,
                                          int grid_size, const OdeTolerance& tol) {
  const int n = sys.n;
  const int m = 2 * n;
  const Matrix pi0 = symmetrize(pi0_in);
  auto norm = std::make_shared<const NormalizedSystem>(sys);
  // State: [vec Phi_M(t,0), vec Sigma(t)].
  OdeRhs rhs = [norm, sys, pi0, n, m](double t, const Vector& y, Vector& dy) {
    Eigen::Map<const Matrix> phi(y.data(), m, m);
    Eigen::Map<const Matrix> sigma(y.data() + m * m, n, n);
    Eigen::Map<Matrix> dphi(dy.data(), m, m);
    Eigen::Map<Matrix> dsigma(dy.data() + m * m, n, n);
    dphi.noalias() = norm->hamiltonian(t) * phi;
    const Matrix x = phi.topLeftCorner(n, n) + phi.topRightCorner(n, n) * pi0;
    const Matrix pi = (phi.bottomLeftCorner(n, n) + phi.bottomRightCorner(n, n) * pi0) * x.inverse();
    const Matrix closed = norm->a(t) - norm->bbt(t) * symmetrize(pi);
    dsigma = closed * sigma + sigma * closed.transpose() + sys.noise_intensity(t);
  };
  OdeOptions opt;
  opt.tol = tol;
  opt.project = [n, m](Vector& y) {
    Eigen::Map<Matrix> sigma(y.data() + m * m, n, n);
    sigma = symmetrize(sigma).eval();
  };
  Vector y0(m * m + n * n);
  y0.head(m * m) = vec(Matrix::Identity(m, m));
  y0.tail(n * n) = vec(symmetrize(sigma0));

  CovarianceTrajectory out;
  out.times = uniform_grid(grid_size);
  DormandPrince solver(rhs, 0.0, y0, opt);
  for (double t : out.times) {
    if (solver.advance_to(t) != OdeStatus::ok) {
      throw NonexistenceError("covariance propagation failed at t=" + format_double(solver.time()));
    }
    out.sigma.push_back(symmetrize(unvec(solver.state().tail(n * n), n)));
  }
  out.endpoint_check = max_abs(out.sigma.back() - BoundaryMap(sys, sigma0, tol)(pi0));
  return out;
}

std::vector<Matrix> feedback_gain(const SystemSpec& sys, const std::vector<double>& times,
                                  const std::vector<Matrix>& pi) {
  if (times.size() != pi.size()) throw DimensionError("feedback_gain: times and Pi grid differ in length");
  std::vector<Matrix> out;
  out.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    out.push_back(-symmetrize(sys.R(t)).ldlt().solve(sys.B(t).transpose() * pi[k]));
  }
  return out;
}

double optimal_cost(const SystemSpec& sys, const Matrix& pi0_in, const BoundaryData& bd, const OdeTolerance& tol,
                    const QuadOptions& quad) {
  const Matrix pi0 = symmetrize(pi0_in);
  HamiltonianFlow flow(sys, 0.0, tol);
  auto pi_at = [&](double t) { return t == 0.0 ? pi0 : closed_form(flow.blocks(t), pi0); };
  const double running =
      integrate_scalar([&](double t) { return (pi_at(t) * sys.noise_intensity(t)).trace(); }, 0.0, 1.0, quad);
  return running + (pi0 * bd.Sigma0).trace() - (pi_at(1.0) * bd.Sigma1).trace();
}

}  // namespace covsteer
