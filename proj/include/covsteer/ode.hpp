#pragma once

// Embedded Runge-Kutta 5(4) (Dormand-Prince) with adaptive steps. Used for
// every matrix ODE in the library; matrices travel as column-stacked vectors.

#include "covsteer/linalg.hpp"

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

namespace covsteer {

struct OdeTolerance {
  double rtol = 1e-10;
  double atol = 1e-13;
};

using OdeRhs = std::function<void(double t, const Vector& y, Vector& dydt)>;

struct OdeOptions {
  OdeTolerance tol;
  /// Stop with OdeStatus::blowup once max|y| exceeds this.
  double blowup_norm = std::numeric_limits<double>::infinity();
  long max_steps = 2'000'000;
  /// Applied to the state after each accepted step (e.g. symmetrization).
  std::function<void(Vector&)> project;
};

enum class OdeStatus { ok, blowup, step_underflow, too_many_steps };

class DormandPrince {
 public:
  DormandPrince(OdeRhs rhs, double t0, Vector y0, OdeOptions options = {});

  /// Integrates up to t_end (either direction). On failure the solver stops
  /// at the last accepted time and every later call returns the same status.
  OdeStatus advance_to(double t_end);

  double time() const noexcept { return t_; }
  const Vector& state() const noexcept { return y_; }
  long steps() const noexcept { return accepted_; }
  OdeStatus status() const noexcept { return status_; }

 private:
  double initial_step(double direction);

  OdeRhs rhs_;
  OdeOptions opt_;
  double t_;
  Vector y_;
  Vector f_;
  double h_ = 0.0;
  long accepted_ = 0;
  OdeStatus status_ = OdeStatus::ok;
  Vector k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, err_;
};

/// One-shot integration from (t0, y0) to t1. Throws IntegrationError on any
/// failure.
Vector integrate_ode(const OdeRhs& rhs, double t0, const Vector& y0, double t1, const OdeOptions& options = {});

/// Solution of an initial-value problem evaluated at arbitrary times on
/// either side of the anchor. States at knots anchor + k*spacing are cached
/// and each knot is always integrated from its predecessor, so a query
/// returns the same bits regardless of which queries came before it.
class KnotFlow {
 public:
  KnotFlow(OdeRhs rhs, double anchor, Vector initial, OdeOptions options = {}, double spacing = 1.0 / 16);

  Vector operator()(double t) const;
  double anchor() const noexcept { return anchor_; }

 private:
  const Vector& knot(long k) const;

  OdeRhs rhs_;
  double anchor_;
  OdeOptions options_;
  double spacing_;
  struct Cache {
    std::mutex mutex;
    std::map<long, Vector> knots;
  };
  std::shared_ptr<Cache> cache_;
};

}  // namespace covsteer
