#include "covsteer/controllability.hpp"

#include "covsteer/errors.hpp"
#include "covsteer/quadrature.hpp"

#include <cmath>
#include <optional>

namespace covsteer {

std::vector<Matrix> theta_matrices(const MatrixPoly& A, const MatrixPoly& B, double t, int max_index) {
  const int n = A.rows();
  if (max_index < 1 || max_index > n + 1) throw DimensionError("theta_matrices: index must lie in 1..n+1");
  std::vector<Matrix> out;
  MatrixPoly gamma = B;
  Matrix theta(n, 0);
  for (int i = 1; i <= max_index; ++i) {
    Matrix g = gamma(t);
    Matrix next(n, theta.cols() + g.cols());
    next << theta, g;
    theta = std::move(next);
    out.push_back(theta);
    gamma = -(A * gamma) + gamma.derivative();
  }
  return out;
}

std::vector<Matrix> theta_matrices(const SystemSpec& sys, double t, int max_index) {
  return theta_matrices(sys.A, sys.B, t, max_index);
}

int numerical_rank(const Matrix& x, double rel_threshold) {
  if (x.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(x);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i) r += sv(i) > rel_threshold * sv(0);
  return r;
}

ControllabilityReport classify(const MatrixPoly& A, const MatrixPoly& B, int grid_size, int probes) {
  const int n = A.rows();
  ControllabilityReport rep;
  rep.grid_times = uniform_grid(grid_size);
  rep.probes_per_subinterval = probes;
  auto full_rank_at = [&](double t) { return numerical_rank(theta_matrices(A, B, t, n).back()) == n; };

  rep.uniformly_controllable = true;
  rep.index_invariant = true;
  for (double t : rep.grid_times) {
    std::vector<int> ranks;
    for (const Matrix& th : theta_matrices(A, B, t, n + 1)) ranks.push_back(numerical_rank(th));
    if (ranks[n - 1] == n) {
      rep.witnesses.push_back(t);
    } else {
      rep.uniformly_controllable = false;
    }
    if (ranks[n - 1] != ranks[n]) rep.index_invariant = false;
    if (!rep.theta_ranks.empty() && ranks != rep.theta_ranks.front()) rep.index_invariant = false;
    rep.theta_ranks.push_back(std::move(ranks));
  }

  rep.totally_controllable = true;
  for (std::size_t k = 0; k + 1 < rep.grid_times.size() && rep.totally_controllable; ++k) {
    const double lo = rep.grid_times[k];
    const double h = rep.grid_times[k + 1] - lo;
    bool witnessed = false;
    for (int j = 1; j <= probes && !witnessed; ++j) witnessed = full_rank_at(lo + h * j / (probes + 1));
    rep.totally_controllable = witnessed;
  }
  return rep;
}

ControllabilityReport classify(const SystemSpec& sys, int grid_size, int probes) {
  check_dimensions(sys);
  return classify(sys.A, sys.B, grid_size, probes);
}

int kalman_rank(const Matrix& A, const Matrix& B) {
  const auto n = A.rows();
  Matrix k(n, n * B.cols());
  Matrix block = B;
  for (int i = 0; i < n; ++i) {
    k.middleCols(i * B.cols(), B.cols()) = block;
    block = A * block;
  }
  return numerical_rank(k);
}

CanonicalTransform canonical_transform(const Matrix& A, const Matrix& B) {
  const int n = static_cast<int>(A.rows());
  const int p = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n) throw DimensionError("canonical_transform: A must be n x n and B n x p");
  if (kalman_rank(A, B) < n) throw NotControllableError("pair (A, B) is not controllable");

  int col = 0;
  while (col < p && B.col(col).norm() == 0.0) ++col;
  Vector v = Vector::Zero(p);
  v(col) = 1.0;
  const Vector b = B * v;

  // Chain x_{k+1} = A x_k + B w_k with w_k = 0 whenever possible, else a unit vector.
  Matrix X(n, n);
  Matrix W = Matrix::Zero(p, n);
  X.col(0) = b;
  for (int k = 1; k < n; ++k) {
    bool found = false;
    for (int choice = -1; choice < p && !found; ++choice) {
      Vector w = Vector::Zero(p);
      if (choice >= 0) w(choice) = 1.0;
      const Vector cand = A * X.col(k - 1) + B * w;
      Matrix trial(n, k + 1);
      trial << X.leftCols(k), cand;
      if (numerical_rank(trial) == k + 1) {
        X.col(k) = cand;
        W.col(k - 1) = w;
        found = true;
      }
    }
    if (!found) throw NotControllableError("pair (A, B) is not controllable");
  }

  const Matrix x_inv = checked_inverse(X, "controllability chain");
  const Matrix f_bar = W * x_inv;
  const Matrix a_bar = A + B * f_bar;
  // Characteristic polynomial of a_bar: s^n + a_{n-1} s^{n-1} + ... + a_0.
  const Vector c = x_inv * (a_bar * X.col(n - 1));
  const Vector coeff = -c;
  Matrix t_inv(n, n);
  t_inv.col(n - 1) = b;
  for (int k = n - 2; k >= 0; --k) t_inv.col(k) = a_bar * t_inv.col(k + 1) + coeff(k + 1) * b;

  CanonicalTransform out;
  out.T = checked_inverse(t_inv, "canonical basis");
  out.F = f_bar + v * coeff.transpose() * out.T;
  out.v = v;
  return out;
}

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

MatrixPoly power(const MatrixPoly& x, int k) {
  MatrixPoly r = MatrixPoly::scalar({1.0});
  for (int i = 0; i < k; ++i) r = r * x;
  return r;
}

MatrixPoly monomial(int k) {
  std::vector<double> c(k + 1, 0.0);
  c[k] = 1.0;
  return MatrixPoly::scalar(std::move(c));
}

double value(const MatrixPoly& p, double t, int order = 0) { return p.evaluate(t, order)(0, 0); }

// Running integral int_0^t g on fixed panels, for repeated queries.
class PanelIntegral {
 public:
  static constexpr int kPanels = 64;

  explicit PanelIntegral(std::function<double(double)> g) : g_(std::move(g)), sums_(kPanels + 1, 0.0) {
    for (int k = 0; k < kPanels; ++k) {
      sums_[k + 1] = sums_[k] + integrate_scalar(g_, static_cast<double>(k) / kPanels,
                                                 static_cast<double>(k + 1) / kPanels, tight());
    }
  }

  double operator()(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return sums_.back();
    const int k = std::min(static_cast<int>(t * kPanels), kPanels - 1);
    const double lo = static_cast<double>(k) / kPanels;
    return sums_[k] + (t > lo ? integrate_scalar(g_, lo, t, tight()) : 0.0);
  }

 private:
  static QuadOptions tight() {
    QuadOptions q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-13;
    return q;
  }

  std::function<double(double)> g_;
  std::vector<double> sums_;
};

// Integral of f * bump: d0 e^{-1/(t(1-t))}.
double bump_integral(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return std::exp(-1.0 / (t * (1.0 - t)));
}

}  // namespace

ScalarSteeringU::ScalarSteeringU(ScalarSteeringProblem problem, std::vector<double> a, std::vector<double> b, double c0)
    : prob_(std::move(problem)), a_(std::move(a)), b_(std::move(b)), c0_(c0) {
  const int h = H();
  const MatrixPoly one_minus_t = MatrixPoly::scalar({1.0, -1.0});
  MatrixPoly poly = MatrixPoly::scalar(a_);
  MatrixPoly tail = MatrixPoly::scalar({0.0});
  for (int i = 0; i <= h; ++i) tail = tail + b_[i] * power(one_minus_t, i);
  poly = poly + monomial(h + 1) * tail;
  poly = poly + c0_ * (monomial(h + 1) * power(one_minus_t, h + 1));
  poly_ = poly;
  prepare_cumulative();
}

void ScalarSteeringU::prepare_cumulative() {
  panel_sums_.clear();
  auto f = prob_.f;
  MatrixPoly poly = poly_;
  PanelIntegral cumulative([f, poly](double t) { return f(t, 0).value() * value(poly, t); });
  for (int k = 0; k <= PanelIntegral::kPanels; ++k) panel_sums_.push_back(cumulative(static_cast<double>(k) / PanelIntegral::kPanels));
}

Jet ScalarSteeringU::jet(double t, int order) const {
  std::vector<Matrix> tc = poly_.taylor(t, order);
  Jet out(order);
  for (int k = 0; k <= order; ++k) out[k] = tc[k](0, 0);
  if (d0_ == 0.0 || t <= 0.0 || t >= 1.0) return out;
  const Jet tau = Jet::variable(order, t);
  const Jet g = tau * (1.0 + (-1.0) * tau);
  // e^{-1/g} underflows long before g reaches this size.
  if (g.value() < 1e-3) return out;
  const Jet e = exp(-1.0 * (Jet(order, 1.0) / g));
  const Jet bump = d0_ * ((1.0 + (-2.0) * tau) * e / (g * g * prob_.f(t, order)));
  return out + bump;
}

double ScalarSteeringU::cumulative(double t) const {
  if (t <= 0.0) return 0.0;
  const int panels = PanelIntegral::kPanels;
  double poly_part;
  if (t >= 1.0) {
    poly_part = panel_sums_.back();
  } else {
    const int k = std::min(static_cast<int>(t * panels), panels - 1);
    const double lo = static_cast<double>(k) / panels;
    QuadOptions q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-13;
    poly_part = panel_sums_[k] +
                (t > lo ? integrate_scalar([this](double s) { return prob_.f(s, 0).value() * value(poly_, s); }, lo, t, q)
                        : 0.0);
  }
  return poly_part + d0_ * bump_integral(t);
}

double ScalarSteeringU::integral_residual() const {
  QuadOptions q;
  q.abs_tol = 1e-13;
  q.rel_tol = 1e-13;
  const double total = integrate_scalar([this](double t) { return prob_.f(t, 0).value() * (*this)(t); }, 0.0, 1.0, q);
  return std::abs(total - prob_.gamma);
}

double ScalarSteeringU::floor_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (double t : uniform_grid(kFloorGrid)) gap = std::min(gap, cumulative(t) - prob_.rho(t));
  return gap;
}

ScalarSteeringU scalar_steering_u(const ScalarSteeringProblem& problem) {
  if (problem.alpha.empty() || problem.alpha.size() != problem.beta.size()) {
    throw DimensionError("scalar_steering_u: alpha and beta need the same nonzero length");
  }
  const int h = static_cast<int>(problem.alpha.size()) - 1;
  std::vector<double> a(h + 1);
  for (int i = 0; i <= h; ++i) a[i] = problem.alpha[i] / factorial(i);
  const MatrixPoly a_poly = MatrixPoly::scalar(a);

  // b^(j)(1) = beta_j - a^(j)(1); phi_i = t^{H+1} (1-t)^i has phi_i^(j)(1) = 0 for j < i.
  const MatrixPoly one_minus_t = MatrixPoly::scalar({1.0, -1.0});
  std::vector<MatrixPoly> phi;
  for (int i = 0; i <= h; ++i) phi.push_back(monomial(h + 1) * power(one_minus_t, i));
  std::vector<double> b(h + 1, 0.0);
  for (int j = 0; j <= h; ++j) {
    double rhs = problem.beta[j] - value(a_poly, 1.0, j);
    for (int i = 0; i < j; ++i) rhs -= b[i] * value(phi[i], 1.0, j);
    b[j] = rhs / value(phi[j], 1.0, j);
  }
  MatrixPoly ab = a_poly;
  for (int i = 0; i <= h; ++i) ab = ab + b[i] * phi[i];
  const MatrixPoly cpoly = monomial(h + 1) * power(one_minus_t, h + 1);

  QuadOptions q;
  q.abs_tol = 1e-14;
  q.rel_tol = 1e-13;
  auto fval = [&problem](double t) { return problem.f(t, 0).value(); };
  const double fab = integrate_scalar([&](double t) { return fval(t) * value(ab, t); }, 0.0, 1.0, q);
  const double fc = integrate_scalar([&](double t) { return fval(t) * value(cpoly, t); }, 0.0, 1.0, q);
  const double c0 = (problem.gamma - fab) / fc;

  ScalarSteeringU u(problem, a, b, c0);
  const std::vector<double> grid = uniform_grid(kFloorGrid);
  std::vector<double> base, bump, floor;
  for (double t : grid) {
    base.push_back(u.cumulative(t));
    bump.push_back(bump_integral(t));
    floor.push_back(problem.rho(t));
  }
  auto feasible = [&](double d0) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!(base[i] + d0 * bump[i] > floor[i])) return false;
    return true;
  };
  double d0 = 0.0;
  if (!feasible(0.0)) {
    d0 = kBumpStart;
    while (d0 <= kBumpMax && !feasible(d0)) d0 *= 2.0;
    if (d0 > kBumpMax) {
      throw InfeasibleError("no bump amplitude up to 1e6 keeps the running integral above the floor");
    }
  }
  u.d0_ = d0;
  return u;
}

namespace {

struct Context {
  int n = 0;
  MatrixPoly M;
  MatrixPoly nu;
  MatrixPoly N;
  JetFunction f;
  std::vector<LayerRecord>* trace = nullptr;

  Jet nu_jet(double t, int order) const {
    std::vector<Matrix> c = nu.taylor(t, order);
    Jet j(order);
    for (int k = 0; k <= order; ++k) j[k] = c[k](0, 0);
    return j;
  }
  Jet m_jet(int r, int c, double t, int order) const {
    std::vector<Matrix> tc = M.taylor(t, order);
    Jet j(order);
    for (int k = 0; k <= order; ++k) j[k] = tc[k](r, c);
    return j;
  }
  double growth(double t) const { return std::exp(2.0 * value(N, t)); }
};

// Taylor products of scalar series truncated at the shorter length.
double cauchy(const std::vector<double>& x, const std::vector<double>& y, int j) {
  double s = 0.0;
  for (int l = 0; l <= j; ++l) s += x[l] * y[j - l];
  return s;
}

// Layer of size k in canonical coordinates: the top-left k x k block of Sigma,
// driven by the k-vector input (the next layer's Sigma_dagger, or U at the top).
class Layer {
 public:
  Layer(std::shared_ptr<const Context> ctx, int k, const Matrix& sigma0, const Matrix& sigma1,
        const std::vector<std::vector<double>>& bc0, const std::vector<std::vector<double>>& bc1)
      : ctx_(std::move(ctx)), k_(k) {
    const int h = static_cast<int>(bc0.front().size()) - 1;
    star0_ = sigma0(k - 1, k - 1);
    star1_ = sigma1(k - 1, k - 1);
    if (k > 1) {
      inner_ = std::make_unique<Layer>(ctx_, k - 1, sigma0.topLeftCorner(k - 1, k - 1),
                                       sigma1.topLeftCorner(k - 1, k - 1), dagger_bc(sigma0, bc0, 0.0, h),
                                       dagger_bc(sigma1, bc1, 1.0, h));
    }

    const int corner = k - 1;
    auto ctx_ptr = ctx_;
    im_ = std::make_unique<PanelIntegral>([ctx_ptr, corner](double t) {
      return ctx_ptr->M(t)(corner, corner) / ctx_ptr->growth(t);
    });
    ScalarSteeringProblem prob;
    prob.f = ctx_->f;
    for (int i = 0; i <= h; ++i) {
      prob.alpha.push_back(bc0[corner][i] * factorial(i));
      prob.beta.push_back(bc1[corner][i] * factorial(i));
    }
    prob.gamma = star1_ / ctx_->growth(1.0) - star0_ - (*im_)(1.0);
    prob.rho = [this](double t) { return floor(t) / ctx_->growth(t) - star0_ - (*im_)(t); };
    ustar_ = std::make_unique<ScalarSteeringU>(scalar_steering_u(prob));

    LayerRecord rec;
    rec.size = k;
    rec.input_bc0 = bc0;
    rec.input_bc1 = bc1;
    rec.corner0 = star0_;
    rec.corner1 = star1_;
    rec.gamma = prob.gamma;
    rec.a = ustar_->a();
    rec.b = ustar_->b();
    rec.c0 = ustar_->c0();
    rec.d0 = ustar_->d0();
    if (ctx_->trace) ctx_->trace->push_back(std::move(rec));
  }

  double star(double t) const {
    return ctx_->growth(t) * (star0_ + (*im_)(t) + ustar_->cumulative(t));
  }

  Matrix sigma(double t) const {
    Matrix s(k_, k_);
    s(k_ - 1, k_ - 1) = star(t);
    if (inner_) {
      const Vector dag = input_value(*inner_, t);
      s.topLeftCorner(k_ - 1, k_ - 1) = inner_->sigma(t);
      s.topRightCorner(k_ - 1, 1) = dag;
      s.bottomLeftCorner(1, k_ - 1) = dag.transpose();
    }
    return s;
  }

  /// Jets of the k input components at t.
  std::vector<Jet> input_jets(double t, int order) const {
    Jet ustar = ustar_->jet(t, order);
    if (!inner_) return {ustar};
    const int m = k_ - 1;
    std::vector<Jet> dag = inner_->input_jets(t, order + 1);
    Jet nu = ctx_->nu_jet(t, order + 1);
    // Sigma_star series from its value and the corner equation.
    Jet s(order + 1, star(t));
    for (int j = 0; j <= order; ++j) {
      double rhs = 2.0 * ustar[j] + ctx_->m_jet(m, m, t, order)[j] + 2.0 * cauchy(nu.coeffs(), s.coeffs(), j);
      s[j + 1] = rhs / (j + 1);
    }
    std::vector<Jet> out;
    for (int i = 0; i < m; ++i) {
      Jet u = dag[i].derivative();
      if (i + 1 < m) u = u - dag[i + 1].truncated(order);
      if (i + 1 == m) u = u - s.truncated(order);
      u = u - ctx_->m_jet(i, m, t, order) - 2.0 * (nu * dag[i]).truncated(order);
      out.push_back(u.truncated(order));
    }
    out.push_back(ustar);
    return out;
  }

 private:
  static Vector input_value(const Layer& layer, double t) {
    std::vector<Jet> j = layer.input_jets(t, 0);
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].value();
    return v;
  }

  double floor(double t) const {
    if (!inner_) return 0.0;
    const Vector dag = input_value(*inner_, t);
    return dag.dot(inner_->sigma(t).ldlt().solve(dag));
  }

  // Taylor coefficients (orders 0..h+1) of Sigma_dagger at t0 from the
  // boundary covariance and the input's coefficients (orders 0..h).
  std::vector<std::vector<double>> dagger_bc(const Matrix& sigma, const std::vector<std::vector<double>>& bc, double t0,
                                             int h) const {
    const int m = k_ - 1;
    std::vector<std::vector<double>> dag(m, std::vector<double>(h + 2, 0.0));
    std::vector<double> star(h + 2, 0.0);
    for (int i = 0; i < m; ++i) dag[i][0] = sigma(i, m);
    star[0] = sigma(m, m);
    const std::vector<double> nu = ctx_->nu_jet(t0, h + 1).coeffs();
    const std::vector<Matrix> mt = ctx_->M.taylor(t0, h + 1);
    for (int j = 0; j <= h; ++j) {
      for (int i = 0; i < m; ++i) {
        double rhs = (i + 1 < m ? dag[i + 1][j] : star[j]) + bc[i][j] + mt[j](i, m) + 2.0 * cauchy(nu, dag[i], j);
        dag[i][j + 1] = rhs / (j + 1);
      }
      star[j + 1] = (2.0 * bc[m][j] + mt[j](m, m) + 2.0 * cauchy(nu, star, j)) / (j + 1);
    }
    return dag;
  }

  std::shared_ptr<const Context> ctx_;
  int k_;
  double star0_ = 0.0, star1_ = 0.0;
  std::unique_ptr<Layer> inner_;
  std::unique_ptr<PanelIntegral> im_;
  std::unique_ptr<ScalarSteeringU> ustar_;
};

}  // namespace

FeasibleSteering construct_feasible_steering(const Matrix& A, const Matrix& B, const BoundaryData& bd,
                                             const MatrixPoly& M, const MatrixPoly& nu, int H, int grid_size) {
  const int n = static_cast<int>(A.rows());
  if (n < 1 || n > kMaxConstructDimension) throw PreconditionError("feasible steering is limited to n <= 3");
  if (H < 0) throw PreconditionError("H must be nonnegative");
  if (M.rows() != n || M.cols() != n || nu.rows() != 1 || nu.cols() != 1) {
    throw DimensionError("M must be n x n and nu 1 x 1");
  }
  check_boundary(bd, n);
  for (double t : uniform_grid(kValidationGrid)) {
    if (min_eigenvalue(symmetrize(M(t))) < kSemidefiniteFloor)
      throw PreconditionError("M not positive semidefinite at t=" + format_double(t));
    if (value(nu, t) < kSemidefiniteFloor) throw PreconditionError("nu negative at t=" + format_double(t));
  }

  FeasibleSteering out;
  out.transform = canonical_transform(A, B);
  const Matrix T = out.transform.T;
  const Matrix t_inv = checked_inverse(T, "T");

  auto ctx = std::make_shared<Context>();
  ctx->n = n;
  ctx->M = MatrixPoly::constant(T) * M * MatrixPoly::constant(T.transpose());
  ctx->nu = nu;
  ctx->N = nu.antiderivative();
  const MatrixPoly N = ctx->N;
  ctx->f = [N](double t, int order) {
    std::vector<Matrix> c = N.taylor(t, order);
    Jet j(order);
    for (int k = 0; k <= order; ++k) j[k] = -2.0 * c[k](0, 0);
    return 2.0 * exp(j);
  };
  ctx->trace = &out.layers;

  const std::vector<std::vector<double>> zero_bc(n, std::vector<double>(H + 1, 0.0));
  auto top = std::make_shared<Layer>(ctx, n, symmetrize(T * bd.Sigma0 * T.transpose()),
                                     symmetrize(T * bd.Sigma1 * T.transpose()), zero_bc, zero_bc);
  ctx->trace = nullptr;

  const CanonicalTransform tr = out.transform;
  out.Sigma = [top, t_inv](double t) { return Matrix(symmetrize(t_inv * top->sigma(t) * t_inv.transpose())); };
  out.K = [top, tr](double t) {
    std::vector<Jet> j = top->input_jets(t, 0);
    Vector u(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) u(i) = j[i].value();
    const Matrix k_canon = top->sigma(t).ldlt().solve(u).transpose();
    return Matrix(tr.F + tr.v * k_canon * tr.T);
  };
  auto sigma_fn = out.Sigma;
  auto gain_fn = out.K;
  out.U = [sigma_fn, gain_fn](double t) { return Matrix(sigma_fn(t) * gain_fn(t).transpose()); };

  out.times = uniform_grid(grid_size);
  for (double t : out.times) {
    out.sigma.push_back(out.Sigma(t));
    out.gain.push_back(out.K(t));
  }
  out.endpoint_error = std::max(max_abs(out.sigma.front() - bd.Sigma0), max_abs(out.sigma.back() - bd.Sigma1));
  return out;
}

}  // namespace covsteer
