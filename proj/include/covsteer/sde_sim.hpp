#pragma once

// Monte Carlo simulation of the closed-loop jump diffusion
//   dx = (A + B K) x dt + C dm + x dmu
// with Wiener and compound-Poisson components in m and mu.

#include "covsteer/matfun.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace covsteer {

enum class NoiseKind { wiener, compound_poisson };

struct NoiseComponent {
  /// Index into the additive channels of m; ignored for multiplicative components.
  int channel = 0;
  NoiseKind kind = NoiseKind::wiener;
  /// Diffusion rate dE[w^2]/dt for Wiener parts, arrival rate lambda(t) for jumps.
  MatrixPoly rate;
  /// Standard deviation of the zero-mean Gaussian jump size.
  double jump_std = 0.0;
};

struct NoiseModel {
  int q = 0;
  std::vector<NoiseComponent> additive;
  std::vector<NoiseComponent> multiplicative;
};

struct Intensities {
  MatrixPoly D;
  MatrixPoly nu;
};

/// D(t) = diag of the per-channel rates (lambda sigma^2 for jumps) and
/// 2 nu(t) = the summed multiplicative rates.
Intensities derive_intensities(const NoiseModel& noise);

struct GainSchedule {
  std::vector<double> times;
  std::vector<Matrix> gains;

  /// Linear interpolation between grid points.
  Matrix operator()(double t) const;
};

struct SimulationConfig {
  long num_paths = 100000;
  double step_size = 1e-3;
  std::uint64_t master_seed = 0;
  Matrix Sigma0;
  /// Defaults to zero.
  std::optional<Vector> initial_mean;
  int retain_paths = 10;
  /// Moments are recorded every this many steps and at t = 1.
  int checkpoint_stride = 10;
  /// 0 means std::thread::hardware_concurrency().
  int threads = 0;
  /// Skip the cost integral (estimate_cost then throws).
  bool track_cost = true;
};

inline constexpr int kBlockPaths = 1024;
inline constexpr double kMaxStepSize = 0.01;

/// Streaming mean and scatter of vector samples; merges are exact (Chan et al.).
struct MomentAccumulator {
  long count = 0;
  Vector mean;
  Matrix scatter;

  explicit MomentAccumulator(int dim = 0) : mean(Vector::Zero(dim)), scatter(Matrix::Zero(dim, dim)) {}
  void add(const Vector& x);
  void merge(const MomentAccumulator& other);
};

/// Merges in a fixed pairwise tree so the result depends only on the order of `parts`.
MomentAccumulator merge_pairwise(std::vector<MomentAccumulator> parts);

struct RetainedPath {
  long path_id = 0;
  std::vector<Vector> x;
  std::vector<Vector> u;
};

struct SimulationResult {
  int n = 0;
  int p = 0;
  long num_paths = 0;
  double step_size = 0.0;
  std::uint64_t master_seed = 0;
  std::vector<double> step_times;
  std::vector<double> checkpoint_times;
  std::vector<MomentAccumulator> moments;
  std::vector<RetainedPath> paths;
  bool cost_tracked = false;
  /// Per-path cost integral, as a 1-D accumulator.
  MomentAccumulator cost{1};
  /// Compound-Poisson arrivals in the additive channels per path.
  MomentAccumulator jump_count{1};
  /// m(1) per additive channel.
  MomentAccumulator martingale_end;
};

SimulationResult simulate_paths(const SystemSpec& sys, const NoiseModel& noise, const GainSchedule& gain,
                                const SimulationConfig& cfg);

struct Moments {
  Vector mean;
  Matrix cov;
  /// False when fewer than two samples are available.
  bool cov_defined = false;
  long count = 0;
};

Moments empirical_moments(const SimulationResult& result, double t);
Moments moments_of(const MomentAccumulator& acc);

struct CostEstimate {
  double mean = 0.0;
  double half_width = 0.0;
};

CostEstimate estimate_cost(const SystemSpec& sys, const SimulationResult& result);

/// Mean and +-3 sqrt(Sigma_ii) bands at each checkpoint.
struct EnvelopeRow {
  double t;
  Vector mean;
  Vector lower;
  Vector upper;
};
std::vector<EnvelopeRow> envelope(const SimulationResult& result);

}  // namespace covsteer
