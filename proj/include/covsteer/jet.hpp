#pragma once

// Truncated Taylor series c_0 + c_1 h + ... + c_r h^r about a point, with
// c_k = f^(k) / k!. Enough arithmetic to differentiate the closed-form
// expressions used by the feasible-steering construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace covsteer {

class Jet {
 public:
  Jet() = default;
  explicit Jet(int order, double value = 0.0) : c_(order + 1, 0.0) { c_[0] = value; }
  explicit Jet(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

  /// The independent variable at t.
  static Jet variable(int order, double t) {
    Jet j(order, t);
    if (order >= 1) j.c_[1] = 1.0;
    return j;
  }

  int order() const noexcept { return static_cast<int>(c_.size()) - 1; }
  double operator[](std::size_t k) const { return c_[k]; }
  double& operator[](std::size_t k) { return c_[k]; }
  const std::vector<double>& coeffs() const noexcept { return c_; }
  double value() const { return c_[0]; }
  /// k-th derivative at the expansion point.
  double derivative_value(int k) const {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return c_[k] * f;
  }

  /// Series of the derivative (one order shorter).
  Jet derivative() const {
    Jet d(std::max(order() - 1, 0));
    for (int k = 0; k + 1 <= order(); ++k) d.c_[k] = (k + 1) * c_[k + 1];
    return d;
  }

  Jet truncated(int order) const {
    Jet t(order);
    for (int k = 0; k <= order && k <= this->order(); ++k) t.c_[k] = c_[k];
    return t;
  }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r(std::min(a.order(), b.order()));
    for (int k = 0; k <= r.order(); ++k) r.c_[k] = a.c_[k] + b.c_[k];
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r(std::min(a.order(), b.order()));
    for (int k = 0; k <= r.order(); ++k) r.c_[k] = a.c_[k] - b.c_[k];
    return r;
  }
  friend Jet operator-(const Jet& a) { return -1.0 * a; }
  friend Jet operator*(double s, const Jet& a) {
    Jet r = a;
    for (double& x : r.c_) x *= s;
    return r;
  }
  friend Jet operator+(double s, const Jet& a) {
    Jet r = a;
    r.c_[0] += s;
    return r;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(std::min(a.order(), b.order()));
    for (int k = 0; k <= r.order(); ++k) {
      double s = 0.0;
      for (int j = 0; j <= k; ++j) s += a.c_[j] * b.c_[k - j];
      r.c_[k] = s;
    }
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet q(std::min(a.order(), b.order()));
    for (int k = 0; k <= q.order(); ++k) {
      double s = a.c_[k];
      for (int j = 0; j < k; ++j) s -= q.c_[j] * b.c_[k - j];
      q.c_[k] = s / b.c_[0];
    }
    return q;
  }
  friend Jet exp(const Jet& a) {
    Jet e(a.order());
    e.c_[0] = std::exp(a.c_[0]);
    for (int k = 1; k <= a.order(); ++k) {
      double s = 0.0;
      for (int j = 1; j <= k; ++j) s += j * a.c_[j] * e.c_[k - j];
      e.c_[k] = s / k;
    }
    return e;
  }

 private:
  std::vector<double> c_{0.0};
};

}  // namespace covsteer
