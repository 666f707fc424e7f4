#pragma once

// Matrix Riccati differential equation
//   dPi/dt = -A'Pi - Pi A + Pi B R^{-1} B' Pi - Q - 2 nu Pi - 2 sum nu_i E_i' Pi E_i
// through the Hamiltonian transition blocks: existence test, closed-form
// evaluation, maximal interval of existence, and plain forward integration
// when general channels are present.

#include "covsteer/transition.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace covsteer {

struct ExistenceVerdict {
  bool exists = false;
  /// lambda_min(upper(s) - Pi_s); +inf when s = 1.
  double upper_margin = 0.0;
  /// lambda_min(Pi_s - lower(s)); +inf when s = 0.
  double lower_margin = 0.0;
};

ExistenceVerdict existence_check(const SystemSpec& sys, double s, const Matrix& pi_s, const OdeTolerance& tol = {});
ExistenceVerdict existence_check(const PiBounds& bounds, const Matrix& pi_s);

/// (phi21 + phi22 Pi_s)(phi11 + phi12 Pi_s)^{-1} with the blocks at (t, s).
/// Throws NonexistenceError if the right factor is singular.
Matrix closed_form(const TransitionBlocks& blocks, const Matrix& pi_s);
Matrix solve_closed_form(const SystemSpec& sys, double s, const Matrix& pi_s, double t, const OdeTolerance& tol = {});

struct MaximalInterval {
  double t0 = 0.0;
  double t1 = 0.0;
  /// The end was not found inside the search window and is clamped to it.
  bool t0_window_exceeded = false;
  bool t1_window_exceeded = false;
};

inline constexpr double kIntervalBisectionTol = 1e-6;

MaximalInterval maximal_interval(const SystemSpec& sys, double s, const Matrix& pi_s,
                                 std::pair<double, double> window, const OdeTolerance& tol = {});

struct RiccatiSolution {
  double anchor_time = 0.0;
  Matrix anchor_value;
  std::vector<double> times;
  std::vector<Matrix> values;
  bool exists = true;
  std::optional<double> escape_time;
  /// Empty unless requested.
  std::vector<PiBounds> bounds;
};

/// Pi on a uniform grid from the closed form, anchored at (s, Pi_s).
RiccatiSolution riccati_grid(const SystemSpec& sys, double s, const Matrix& pi_s, int grid_size,
                             bool with_bounds = false, const OdeTolerance& tol = {});

inline constexpr double kBlowupNorm = 1e12;

/// Forward integration from t = 0 including every multiplicative channel.
/// Blow-up is reported through `exists` and `escape_time`.
RiccatiSolution integrate_general(const SystemSpec& sys, const Matrix& pi0, int grid_size, const OdeTolerance& tol = {});

}  // namespace covsteer
