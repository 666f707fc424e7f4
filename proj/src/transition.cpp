#include "covsteer/transition.hpp"

#include "covsteer/errors.hpp"

#include <algorithm>
#include <cmath>

namespace covsteer {

NormalizedSystem::NormalizedSystem(const SystemSpec& sys) : sys_(sys) {
  if (sys_.R.is_constant()) constant_r_inv_sqrt_ = inv_sqrtm_pd(symmetrize(sys_.R(0.0)));
}

Matrix NormalizedSystem::a(double t) const {
  return sys_.A(t) + sys_.effective_nu(t) * Matrix::Identity(sys_.n, sys_.n);
}

Matrix NormalizedSystem::b(double t) const {
  if (constant_r_inv_sqrt_) return sys_.B(t) * *constant_r_inv_sqrt_;
  return sys_.B(t) * inv_sqrtm_pd(symmetrize(sys_.R(t)));
}

Matrix NormalizedSystem::bbt(double t) const {
  Matrix bn = b(t);
  return symmetrize(bn * bn.transpose());
}

Matrix NormalizedSystem::hamiltonian(double t) const {
  const int n = sys_.n;
  Matrix m(2 * n, 2 * n);
  Matrix an = a(t);
  m.topLeftCorner(n, n) = an;
  m.topRightCorner(n, n) = -bbt(t);
  m.bottomLeftCorner(n, n) = -q(t);
  m.bottomRightCorner(n, n) = -an.transpose();
  return m;
}

Matrix TransitionBlocks::full() const {
  const auto n = phi11.rows();
  Matrix m(2 * n, 2 * n);
  m << phi11, phi12, phi21, phi22;
  return m;
}

Matrix TransitionBlocks::controllability_gramian() const {
  return -checked_inverse(phi11, "phi11") * phi12;
}

Matrix TransitionBlocks::terminal_gramian() const {
  return -phi12 * checked_inverse(phi22, "phi22");
}

namespace {

double asym(const Matrix& x) { return max_abs(x - x.transpose()); }

std::array<double, 6> block_identities(const Matrix& p11, const Matrix& p12, const Matrix& p21,
                                       const Matrix& p22) {
  const Matrix id = Matrix::Identity(p11.rows(), p11.cols());
  return {asym(p12.transpose() * p22),
          asym(p21.transpose() * p11),
          asym(p12 * p11.transpose()),
          asym(p21 * p22.transpose()),
          max_abs(p11.transpose() * p22 - p21.transpose() * p12 - id),
          max_abs(p11 * p22.transpose() - p12 * p21.transpose() - id)};
}

}  // namespace

TransitionBlocks make_blocks(const Matrix& phi, double t, double s, const OdeTolerance& tol) {
  const auto n = phi.rows() / 2;
  TransitionBlocks b;
  b.phi11 = phi.topLeftCorner(n, n);
  b.phi12 = phi.topRightCorner(n, n);
  b.phi21 = phi.bottomLeftCorner(n, n);
  b.phi22 = phi.bottomRightCorner(n, n);
  b.t = t;
  b.s = s;
  b.tol = tol;
  b.cond11 = condition_number(b.phi11);
  b.cond22 = condition_number(b.phi22);
  auto ids = block_identities(b.phi11, b.phi12, b.phi21, b.phi22);
  b.symplectic_residual = *std::max_element(ids.begin(), ids.end());
  return b;
}

namespace {

KnotFlow make_hamiltonian_flow(const std::shared_ptr<const NormalizedSystem>& sys, double anchor,
                               const OdeTolerance& tol) {
  const int m = 2 * sys->n();
  OdeRhs rhs = [sys, m](double t, const Vector& y, Vector& dy) {
    Eigen::Map<const Matrix> phi(y.data(), m, m);
    Eigen::Map<Matrix> out(dy.data(), m, m);
    out.noalias() = sys->hamiltonian(t) * phi;
  };
  OdeOptions opt;
  opt.tol = tol;
  Matrix id = Matrix::Identity(m, m);
  return KnotFlow(std::move(rhs), anchor, vec(id), std::move(opt));
}

}  // namespace

HamiltonianFlow::HamiltonianFlow(const SystemSpec& sys, double anchor, const OdeTolerance& tol)
    : HamiltonianFlow(std::make_shared<const NormalizedSystem>(sys), anchor, tol) {}

HamiltonianFlow::HamiltonianFlow(std::shared_ptr<const NormalizedSystem> sys, double anchor,
                                 const OdeTolerance& tol)
    : sys_(std::move(sys)), tol_(tol), flow_(make_hamiltonian_flow(sys_, anchor, tol)) {}

Matrix HamiltonianFlow::operator()(double t) const { return unvec(flow_(t), 2 * sys_->n()); }

TransitionBlocks HamiltonianFlow::blocks(double t) const {
  return make_blocks((*this)(t), t, flow_.anchor(), tol_);
}

TransitionBlocks transition_blocks(const SystemSpec& sys, double t, double s, const OdeTolerance& tol) {
  return HamiltonianFlow(sys, s, tol).blocks(t);
}

double SymplecticResiduals::max() const {
  double m = *std::max_element(block_identities.begin(), block_identities.end());
  return std::max({m, reversed_diagonal, reversed_phi12, reversed_phi21, inverse_product});
}

std::string SymplecticResiduals::failing_groups(double tol) const {
  std::string out;
  auto add = [&out](const char* name) {
    if (!out.empty()) out += ", ";
    out += name;
  };
  if (*std::max_element(block_identities.begin(), block_identities.end()) > tol) add("block identities");
  if (reversed_diagonal > tol) add("reversed diagonal blocks");
  if (std::max(reversed_phi12, reversed_phi21) > tol) add("reversed off-diagonal blocks");
  if (inverse_product > tol) add("inverse product");
  return out;
}

SymplecticResiduals symplectic_residuals(const SystemSpec& sys, const TransitionBlocks& b) {
  SymplecticResiduals r;
  r.block_identities = block_identities(b.phi11, b.phi12, b.phi21, b.phi22);
  TransitionBlocks rev = transition_blocks(sys, b.s, b.t, b.tol);
  r.reversed_diagonal = std::max(max_abs(b.phi11 - rev.phi22.transpose()), max_abs(b.phi22 - rev.phi11.transpose()));
  r.reversed_phi12 = max_abs(b.phi12 + rev.phi12.transpose());
  r.reversed_phi21 = max_abs(b.phi21 + rev.phi21.transpose());
  const Matrix id = Matrix::Identity(b.phi11.rows(), b.phi11.cols());
  r.inverse_product = max_abs(b.phi11 * rev.phi11 + b.phi12 * rev.phi21 - id);
  return r;
}

namespace {

Matrix bound_from(const TransitionBlocks& b, const char* what) {
  return symmetrize(-checked_inverse(b.phi12, what) * b.phi11);
}

}  // namespace

PiBounds pi_bounds(const HamiltonianFlow& flow) {
  const double t = flow.anchor();
  PiBounds out{Infinite{-1}, Infinite{+1}};
  if (t > 0.0) out.lower = bound_from(flow.blocks(0.0), "phi12(0,t)");
  if (t < 1.0) out.upper = bound_from(flow.blocks(1.0), "phi12(1,t)");
  return out;
}

PiBounds pi_bounds(const SystemSpec& sys, double t, const OdeTolerance& tol) {
  return pi_bounds(HamiltonianFlow(sys, t, tol));
}

GramianCheck gramian_identity(const SystemSpec& sys, double s, const Matrix& pi_s, double t,
                              const OdeTolerance& tol, const QuadOptions& quad) {
  const int n = sys.n;
  GramianCheck out;
  auto norm = std::make_shared<const NormalizedSystem>(sys);
  TransitionBlocks blocks = HamiltonianFlow(norm, s, tol).blocks(t);
  if (t == s) {
    out.mbar = Matrix::Zero(n, n);
    out.rhs = Matrix::Zero(n, n);
    return out;
  }

  // State [vec Pi, vec X] with X the closed-loop fundamental matrix, X(s) = I.
  OdeRhs rhs = [norm, n](double tau, const Vector& y, Vector& dy) {
    Eigen::Map<const Matrix> pi(y.data(), n, n);
    Eigen::Map<const Matrix> x(y.data() + n * n, n, n);
    Eigen::Map<Matrix> dpi(dy.data(), n, n);
    Eigen::Map<Matrix> dx(dy.data() + n * n, n, n);
    Matrix a = norm->a(tau);
    Matrix bb = norm->bbt(tau);
    dpi = -a.transpose() * pi - pi * a + pi * bb * pi - norm->q(tau);
    dx = (a - bb * pi) * x;
  };
  Vector y0(2 * n * n);
  y0.head(n * n) = vec(symmetrize(pi_s));
  y0.tail(n * n) = vec(Matrix::Identity(n, n));
  OdeOptions opt;
  opt.tol = tol;
  opt.blowup_norm = 1e12;
  KnotFlow flow(rhs, s, y0, opt);

  Vector end;
  try {
    end = flow(t);
  } catch (const IntegrationError& e) {
    throw NonexistenceError(std::string("Riccati solution does not exist on the span: ") + e.what());
  }
  const Matrix xt = unvec(end.tail(n * n), n);
  Integrand integrand = [&](double tau) -> Vector {
    Matrix x = unvec(flow(tau).tail(n * n), n);
    Matrix phi = xt * checked_inverse(x, "closed-loop transition");
    return vec(phi * norm->bbt(tau) * phi.transpose());
  };
  Vector integral = integrate_adaptive(integrand, s, t, quad).value;
  out.mbar = symmetrize(unvec(integral, n));
  Matrix phi_pi = blocks.phi11 + blocks.phi12 * symmetrize(pi_s);
  out.rhs = -blocks.phi12 * phi_pi.transpose();
  out.residual = max_abs(out.mbar - out.rhs);
  return out;
}

Matrix reachability_gramian(const SystemSpec& sys, double t, double s, const OdeTolerance& tol,
                            const QuadOptions& quad) {
  const int n = sys.n;
  if (t == s) return Matrix::Zero(n, n);
  auto norm = std::make_shared<const NormalizedSystem>(sys);
  // Y(tau) = Phi_A(s, tau) solves dY/dtau = -Y A(tau).
  OdeRhs rhs = [norm, n](double tau, const Vector& y, Vector& dy) {
    Eigen::Map<const Matrix> ym(y.data(), n, n);
    Eigen::Map<Matrix> out(dy.data(), n, n);
    out.noalias() = -ym * norm->a(tau);
  };
  OdeOptions opt;
  opt.tol = tol;
  KnotFlow flow(rhs, s, vec(Matrix::Identity(n, n)), opt);
  Integrand integrand = [&](double tau) -> Vector {
    Matrix y = unvec(flow(tau), n);
    return vec(y * norm->bbt(tau) * y.transpose());
  };
  return symmetrize(unvec(integrate_adaptive(integrand, s, t, quad).value, n));
}

}  // namespace covsteer
