#pragma once

// Transition matrix of the Hamiltonian
//   M(t) = [[A + nu I, -B R^{-1} B^T], [-Q, -(A + nu I)^T]]
// and the identities its blocks satisfy. Scaling A by nu and B by R^{-1/2}
// reduces the general problem to nu = 0, R = I; every routine here works on
// that reduced form.

#include "covsteer/matfun.hpp"
#include "covsteer/ode.hpp"
#include "covsteer/quadrature.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <variant>

namespace covsteer {

/// Coefficients of the reduced problem, evaluated on demand.
class NormalizedSystem {
 public:
  explicit NormalizedSystem(const SystemSpec& sys);

  int n() const noexcept { return sys_.n; }
  const SystemSpec& spec() const noexcept { return sys_; }

  /// A(t) + nu(t) I
  Matrix a(double t) const;
  /// B(t) R(t)^{-1/2}
  Matrix b(double t) const;
  /// B(t) R(t)^{-1} B(t)^T
  Matrix bbt(double t) const;
  Matrix q(double t) const { return sys_.Q(t); }
  Matrix hamiltonian(double t) const;

 private:
  SystemSpec sys_;
  std::optional<Matrix> constant_r_inv_sqrt_;
};

struct TransitionBlocks {
  Matrix phi11, phi12, phi21, phi22;
  double t = 0.0;
  double s = 0.0;
  OdeTolerance tol;
  double cond11 = 1.0;
  double cond22 = 1.0;
  /// Largest of the six symplectic block identities.
  double symplectic_residual = 0.0;

  Matrix full() const;
  /// -phi11^{-1} phi12
  Matrix controllability_gramian() const;
  /// -phi12 phi22^{-1}
  Matrix terminal_gramian() const;
};

TransitionBlocks make_blocks(const Matrix& phi, double t, double s, const OdeTolerance& tol);

/// Phi_M(., anchor), memoized at fixed knots.
class HamiltonianFlow {
 public:
  HamiltonianFlow(const SystemSpec& sys, double anchor, const OdeTolerance& tol = {});
  HamiltonianFlow(std::shared_ptr<const NormalizedSystem> sys, double anchor, const OdeTolerance& tol = {});

  Matrix operator()(double t) const;
  TransitionBlocks blocks(double t) const;
  double anchor() const noexcept { return flow_.anchor(); }
  int n() const noexcept { return sys_->n(); }
  const NormalizedSystem& system() const noexcept { return *sys_; }

 private:
  std::shared_ptr<const NormalizedSystem> sys_;
  OdeTolerance tol_;
  KnotFlow flow_;
};

TransitionBlocks transition_blocks(const SystemSpec& sys, double t, double s, const OdeTolerance& tol = {});

struct SymplecticResiduals {
  /// phi12'phi22 sym, phi21'phi11 sym, phi12 phi11' sym, phi21 phi22' sym,
  /// phi11'phi22 - phi21'phi12 = I, phi11 phi22' - phi12 phi21' = I
  std::array<double, 6> block_identities{};
  /// phi11(t,s) - phi22(s,t)'
  double reversed_diagonal = 0.0;
  /// phi12(t,s) + phi12(s,t)'
  double reversed_phi12 = 0.0;
  /// phi21(t,s) + phi21(s,t)'
  double reversed_phi21 = 0.0;
  /// phi11(t,s) phi11(s,t) + phi12(t,s) phi21(s,t) - I
  double inverse_product = 0.0;

  double max() const;
  /// Names of the identity groups whose residual exceeds `tol`.
  std::string failing_groups(double tol) const;
};

/// Evaluates every identity, integrating the reversed-argument blocks
/// Phi_M(s, t) separately.
SymplecticResiduals symplectic_residuals(const SystemSpec& sys, const TransitionBlocks& blocks);

/// +infinity or -infinity of the semidefinite cone.
struct Infinite {
  int sign = 1;
};
using LoewnerBound = std::variant<Matrix, Infinite>;

inline const Matrix* finite_bound(const LoewnerBound& b) { return std::get_if<Matrix>(&b); }

struct PiBounds {
  LoewnerBound lower;
  LoewnerBound upper;
};

/// lower = -phi12(0,t)^{-1} phi11(0,t), upper = -phi12(1,t)^{-1} phi11(1,t);
/// infinite markers at t = 0 and t = 1 respectively.
PiBounds pi_bounds(const SystemSpec& sys, double t, const OdeTolerance& tol = {});
PiBounds pi_bounds(const HamiltonianFlow& flow_at_t);

struct GramianCheck {
  Matrix mbar;
  Matrix rhs;
  double residual = 0.0;
};

/// Compares the closed-loop Gramian integral int_s^t Phi_Pi(t,tau) B R^{-1} B'
/// Phi_Pi(t,tau)' dtau against -phi12(t,s) Phi_Pi(t,s)'. The integral uses
/// its own Riccati and closed-loop integrations, independent of Phi_M.
GramianCheck gramian_identity(const SystemSpec& sys, double s, const Matrix& pi_s, double t,
                              const OdeTolerance& tol = {}, const QuadOptions& quad = {});

/// int_s^t Phi_A(s,tau) B R^{-1} B' Phi_A(s,tau)' dtau with A the reduced
/// drift, by quadrature.
Matrix reachability_gramian(const SystemSpec& sys, double t, double s, const OdeTolerance& tol = {},
                            const QuadOptions& quad = {});

}  // namespace covsteer
