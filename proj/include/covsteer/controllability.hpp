#pragma once

// Controllability of time-varying pairs through
//   Theta_i(t) = [Gamma_0 ... Gamma_{i-1}],  Gamma_0 = B,  Gamma_k = -A Gamma_{k-1} + dGamma_{k-1}/dt,
// and the constructive covariance steering for constant controllable pairs.

#include "covsteer/jet.hpp"
#include "covsteer/matfun.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace covsteer {

/// Theta_1(t) ... Theta_maxIndex(t).
std::vector<Matrix> theta_matrices(const SystemSpec& sys, double t, int max_index);
std::vector<Matrix> theta_matrices(const MatrixPoly& A, const MatrixPoly& B, double t, int max_index);

inline constexpr double kRankThreshold = 1e-10;

/// Singular values above kRankThreshold * sigma_max.
int numerical_rank(const Matrix& x, double rel_threshold = kRankThreshold);

struct ControllabilityReport {
  std::vector<double> grid_times;
  /// theta_ranks[k][i-1] = rank Theta_i(grid_times[k]), i = 1..n+1.
  std::vector<std::vector<int>> theta_ranks;
  bool totally_controllable = false;
  bool uniformly_controllable = false;
  bool index_invariant = false;
  /// Grid times with rank Theta_n = n.
  std::vector<double> witnesses;
  /// Interior probes tried in each subinterval when grid points are not witnesses.
  int probes_per_subinterval = 0;
};

ControllabilityReport classify(const SystemSpec& sys, int grid_size = 101, int probes = 10);
ControllabilityReport classify(const MatrixPoly& A, const MatrixPoly& B, int grid_size = 101, int probes = 10);

int kalman_rank(const Matrix& A, const Matrix& B);

struct CanonicalTransform {
  Matrix T;
  Matrix F;
  Vector v;
};

/// T, F, v with T (A + B F) T^{-1} = A_n (ones on the superdiagonal) and
/// T B v = e_n. Throws NotControllableError.
CanonicalTransform canonical_transform(const Matrix& A, const Matrix& B);

/// Smooth function given through its Taylor jets.
using JetFunction = std::function<Jet(double t, int order)>;

struct ScalarSteeringProblem {
  JetFunction f;
  double gamma = 0.0;
  /// u^(i)(0) and u^(i)(1), i = 0..H.
  std::vector<double> alpha;
  std::vector<double> beta;
  std::function<double(double)> rho;
};

inline constexpr int kFloorGrid = 1001;
inline constexpr double kBumpStart = 1e-3;
inline constexpr double kBumpMax = 1e6;

/// u = a(t) + t^{H+1} sum b_i (1-t)^i + c0 t^{H+1} (1-t)^{H+1} + d(t) with the
/// flat bump d(t) = d0 (1-2t) e^{-1/(t(1-t))} / (t^2 (1-t)^2 f(t)).
class ScalarSteeringU {
 public:
  ScalarSteeringU(ScalarSteeringProblem problem, std::vector<double> a, std::vector<double> b, double c0);

  int H() const { return static_cast<int>(a_.size()) - 1; }
  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& b() const { return b_; }
  double c0() const { return c0_; }
  double d0() const { return d0_; }
  const ScalarSteeringProblem& problem() const { return prob_; }

  double operator()(double t) const { return jet(t, 0).value(); }
  Jet jet(double t, int order) const;
  /// int_0^t f u
  double cumulative(double t) const;

  /// |int_0^1 f u - gamma| by adaptive quadrature of the full integrand.
  double integral_residual() const;
  /// min over the floor grid of int_0^t f u - rho(t), interior points.
  double floor_gap() const;

 private:
  friend ScalarSteeringU scalar_steering_u(const ScalarSteeringProblem& problem);
  void prepare_cumulative();

  ScalarSteeringProblem prob_;
  std::vector<double> a_, b_;
  double c0_ = 0.0;
  double d0_ = 0.0;
  MatrixPoly poly_;
  /// int_0^t f * poly on the panel edges.
  std::vector<double> panel_sums_;
};

/// Throws InfeasibleError when no d0 <= 1e6 clears the floor on the grid.
ScalarSteeringU scalar_steering_u(const ScalarSteeringProblem& problem);

struct LayerRecord {
  /// Layer size k (1 = innermost).
  int size = 0;
  /// Taylor coefficients of the layer's input at t = 0 and t = 1, per component.
  std::vector<std::vector<double>> input_bc0, input_bc1;
  double corner0 = 0.0, corner1 = 0.0;
  double gamma = 0.0;
  std::vector<double> a, b;
  double c0 = 0.0, d0 = 0.0;
};

struct FeasibleSteering {
  /// Steering schedule U(t) = Sigma(t) K(t)' in the original coordinates.
  std::function<Matrix(double)> U;
  std::function<Matrix(double)> K;
  std::function<Matrix(double)> Sigma;
  std::vector<double> times;
  std::vector<Matrix> gain;
  std::vector<Matrix> sigma;
  /// Innermost layer first.
  std::vector<LayerRecord> layers;
  CanonicalTransform transform;
  double endpoint_error = 0.0;
};

inline constexpr int kMaxConstructDimension = 3;

FeasibleSteering construct_feasible_steering(const Matrix& A, const Matrix& B, const BoundaryData& bd,
                                             const MatrixPoly& M, const MatrixPoly& nu, int H, int grid_size = 101);

}  // namespace covsteer
