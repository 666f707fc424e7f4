#pragma once

// Optimal covariance steering: the map Pi(0) -> Sigma(1), its Jacobian, the
// Newton solve for Pi(0), covariance propagation and the optimal cost.

#include "covsteer/riccati.hpp"

#include <memory>
#include <vector>

namespace covsteer {

struct JacobianWorkspace {
  /// phi11(1,0) + phi12(1,0) Pi0
  Matrix phiPi10;
  std::vector<double> nodes;
  std::vector<double> weights;
  /// W at each node, W(0) = 0, and at s = 1.
  std::vector<Matrix> W;
  Matrix W10;
  /// Integrand of the boundary map at each node.
  std::vector<Matrix> P;
  Matrix S;
  Matrix jac;
  /// The map value at Pi0 computed on the same nodes.
  Matrix sigma1;
};

/// Pi0 -> Sigma(1) for fixed Sigma0, with the Hamiltonian flow from t = 0
/// cached across evaluations.
class BoundaryMap {
 public:
  BoundaryMap(const SystemSpec& sys, const Matrix& sigma0, const OdeTolerance& tol = {}, const QuadOptions& quad = {});

  int n() const noexcept { return n_; }
  const Matrix& sigma0() const noexcept { return sigma0_; }
  const HamiltonianFlow& flow() const noexcept { return flow_; }
  /// -phi12(1,0)^{-1} phi11(1,0)
  const Matrix& upper_bound() const noexcept { return upper_; }
  /// lambda_max(Pi0 - upper bound); negative iff Pi0 is admissible.
  double admissibility(const Matrix& pi0) const;

  Matrix operator()(const Matrix& pi0) const;
  JacobianWorkspace jacobian(const Matrix& pi0) const;

 private:
  void require_admissible(const Matrix& pi0) const;
  Matrix integrand(double s, const Matrix& pi0, Matrix* w) const;

  int n_;
  SystemSpec sys_;
  Matrix sigma0_;
  QuadOptions quad_;
  HamiltonianFlow flow_;
  TransitionBlocks end_;
  Matrix upper_;
};

Matrix map_f(const SystemSpec& sys, const Matrix& sigma0, const Matrix& pi0);
JacobianWorkspace jacobian_f(const SystemSpec& sys, const Matrix& sigma0, const Matrix& pi0);

/// Symmetric-coordinate helpers: n(n+1)/2 lower-triangle entries, column by column.
Matrix symmetric_embedding(int n);
Matrix symmetric_selection(int n);

struct NewtonStep {
  int iteration = 0;
  double residual = 0.0;
  double step_length = 0.0;
  /// Homotopy parameter of the stage this step belongs to (1 = the real target).
  double theta = 1.0;
};

struct SteeringOptions {
  int grid_size = 101;
  double residual_tol = 1e-8;
  int max_iterations = 30;
  int max_halvings = 40;
  double admissibility_margin = 1e-9;
  int homotopy_steps = 10;
  OdeTolerance tol;
  QuadOptions quad;
};

struct SteeringSolution {
  Matrix Pi0;
  std::vector<double> times;
  std::vector<Matrix> pi;
  std::vector<Matrix> gain;
  std::vector<Matrix> sigma;
  double optimal_cost = 0.0;
  /// ||f(Pi0) - Sigma1||_F / ||Sigma1||_F
  double residual = 0.0;
  std::vector<NewtonStep> newton_trace;
};

/// The Pi0 closed form valid when C D C' = B R^{-1} B'. The check can be
/// skipped to use it as a starting point in the general case.
Matrix special_case_pi0(const SystemSpec& sys, const BoundaryData& bd, bool check_channels = true,
                        const OdeTolerance& tol = {});

/// Pi0 with f(Pi0) = Sigma1 by damped Newton, then all grids and the cost.
SteeringSolution solve_boundary(const SystemSpec& sys, const BoundaryData& bd, const SteeringOptions& options = {});

struct CovarianceTrajectory {
  std::vector<double> times;
  std::vector<Matrix> sigma;
  /// Max-abs gap between the integrated Sigma(1) and the explicit formula.
  double endpoint_check = 0.0;
};

CovarianceTrajectory propagate_covariance(const SystemSpec& sys, const Matrix& pi0, const Matrix& sigma0,
                                          int grid_size, const OdeTolerance& tol = {});

/// K(t) = -R(t)^{-1} B(t)' Pi(t) at each time.
std::vector<Matrix> feedback_gain(const SystemSpec& sys, const std::vector<double>& times,
                                  const std::vector<Matrix>& pi);

double optimal_cost(const SystemSpec& sys, const Matrix& pi0, const BoundaryData& bd, const OdeTolerance& tol = {},
                    const QuadOptions& quad = {});
inline double optimal_cost(const SystemSpec& sys, const SteeringSolution& sol, const BoundaryData& bd) {
  return optimal_cost(sys, sol.Pi0, bd);
}

}  // namespace covsteer
