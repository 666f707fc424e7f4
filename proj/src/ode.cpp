#include "covsteer/ode.hpp"

#include "covsteer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace covsteer {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

DormandPrince::DormandPrince(OdeRhs rhs, double t0, Vector y0, OdeOptions options)
    : rhs_(std::move(rhs)), opt_(std::move(options)), t_(t0), y_(std::move(y0)) {
  const auto n = y_.size();
  f_.resize(n);
  for (Vector* v : {&k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &err_}) v->resize(n);
  rhs_(t_, y_, f_);
}

double DormandPrince::initial_step(double direction) {
  const auto& tol = opt_.tol;
  Vector scale = (tol.atol + tol.rtol * y_.array().abs()).matrix();
  double d0 = (y_.array() / scale.array()).matrix().norm() / std::sqrt(std::max<double>(1, y_.size()));
  double d1 = (f_.array() / scale.array()).matrix().norm() / std::sqrt(std::max<double>(1, y_.size()));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  ytmp_ = y_ + direction * h0 * f_;
  rhs_(t_ + direction * h0, ytmp_, k2_);
  double d2 = ((k2_ - f_).array() / scale.array()).matrix().norm() / std::sqrt(std::max<double>(1, y_.size())) / h0;
  double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min({100 * h0, h1, 0.1});
}

OdeStatus DormandPrince::advance_to(double t_end) {
  if (status_ != OdeStatus::ok) return status_;
  if (t_end == t_) return status_;
  const double dir = t_end > t_ ? 1.0 : -1.0;
  if (h_ == 0.0 || (h_ > 0) != (dir > 0)) h_ = dir * initial_step(dir);

  const auto& tol = opt_.tol;
  bool last_rejected = false;
  while ((t_end - t_) * dir > 0) {
    if (accepted_ >= opt_.max_steps) return status_ = OdeStatus::too_many_steps;
    double h = h_;
    bool clipped = false;
    if ((t_ + h - t_end) * dir > 0) {
      h = t_end - t_;
      clipped = true;
    }
    if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(t_)) && !clipped) {
      return status_ = OdeStatus::step_underflow;
    }

    ytmp_ = y_ + h * a21 * f_;
    rhs_(t_ + c2 * h, ytmp_, k2_);
    ytmp_ = y_ + h * (a31 * f_ + a32 * k2_);
    rhs_(t_ + c3 * h, ytmp_, k3_);
    ytmp_ = y_ + h * (a41 * f_ + a42 * k2_ + a43 * k3_);
    rhs_(t_ + c4 * h, ytmp_, k4_);
    ytmp_ = y_ + h * (a51 * f_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t_ + c5 * h, ytmp_, k5_);
    ytmp_ = y_ + h * (a61 * f_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t_ + h, ytmp_, k6_);
    ynew_ = y_ + h * (a71 * f_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(t_ + h, ynew_, k7_);
    err_ = h * (e1 * f_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    double sum = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      double sc = tol.atol + tol.rtol * std::max(std::abs(y_(i)), std::abs(ynew_(i)));
      double r = err_(i) / sc;
      sum += r * r;
    }
    double err = y_.size() ? std::sqrt(sum / static_cast<double>(y_.size())) : 0.0;

    if (!std::isfinite(err)) {
      h_ = 0.2 * h;
      last_rejected = true;
      continue;
    }
    if (err <= 1.0) {
      t_ = clipped ? t_end : t_ + h;
      y_.swap(ynew_);
      if (opt_.project) {
        opt_.project(y_);
        rhs_(t_, y_, f_);
      } else {
        f_.swap(k7_);
      }
      ++accepted_;
      double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (last_rejected) factor = std::min(factor, 1.0);
      // A clipped step says nothing about the natural step size.
      if (!clipped) h_ = h * factor;
      last_rejected = false;
      if (y_.size() && y_.cwiseAbs().maxCoeff() > opt_.blowup_norm) return status_ = OdeStatus::blowup;
    } else {
      h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
    }
  }
  return status_;
}

Vector integrate_ode(const OdeRhs& rhs, double t0, const Vector& y0, double t1, const OdeOptions& options) {
  DormandPrince solver(rhs, t0, y0, options);
  OdeStatus st = solver.advance_to(t1);
  if (st != OdeStatus::ok) {
    throw IntegrationError("ODE integration stopped at t=" + std::to_string(solver.time()) +
                           (st == OdeStatus::blowup ? " (solution blew up)" : " (step size underflow)"));
  }
  return solver.state();
}

KnotFlow::KnotFlow(OdeRhs rhs, double anchor, Vector initial, OdeOptions options, double spacing)
    : rhs_(std::move(rhs)), anchor_(anchor), options_(std::move(options)), spacing_(spacing),
      cache_(std::make_shared<Cache>()) {
  cache_->knots.emplace(0, std::move(initial));
}

const Vector& KnotFlow::knot(long k) const {
  // caller holds the mutex
  auto it = cache_->knots.find(k);
  if (it != cache_->knots.end()) return it->second;
  const long prev = k > 0 ? k - 1 : k + 1;
  const Vector& from = knot(prev);
  Vector next = integrate_ode(rhs_, anchor_ + prev * spacing_, from, anchor_ + k * spacing_, options_);
  return cache_->knots.emplace(k, std::move(next)).first->second;
}

Vector KnotFlow::operator()(double t) const {
  const double offset = (t - anchor_) / spacing_;
  const long k = static_cast<long>(std::trunc(offset));
  Vector start;
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    start = knot(k);
  }
  const double tk = anchor_ + k * spacing_;
  if (tk == t) return start;
  return integrate_ode(rhs_, tk, start, t, options_);
}

}  // namespace covsteer
