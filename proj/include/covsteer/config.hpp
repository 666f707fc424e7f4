#pragma once

// JSON run configuration. Matrices are row-major nested arrays; each entry is
// a number or an ascending-degree coefficient array.

#include "covsteer/matfun.hpp"
#include "covsteer/sde_sim.hpp"
#include "covsteer/steering.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace covsteer {

struct RunOptions {
  int grid_size = 1001;
  double residual_tol = 1e-8;
  int max_iterations = 30;
  double ode_rtol = 1e-10;
  double ode_atol = 1e-13;
  long num_paths = 100000;
  double step_size = 1e-3;
  std::uint64_t seed = 0;
  int retain_paths = 10;
  int checkpoint_stride = 10;
  int threads = 0;
  double certify_tol = 0.05;
  int classify_grid = 101;
  int classify_probes = 10;
  int construct_order = 0;

  bool operator==(const RunOptions&) const = default;
};

struct RunConfig {
  SystemSpec system;
  /// Absent noise means simulate/certify are unavailable.
  std::optional<NoiseModel> noise;
  std::optional<BoundaryData> boundary;
  RunOptions options;
  std::string output_dir = "out";
};

/// Throws ConfigError on malformed input, unknown keys or shape mismatches.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
/// Emits 2-space indented JSON that parses back to an identical config.
std::string emit_config(const RunConfig& cfg);

SteeringOptions steering_options(const RunOptions& opt);
SimulationConfig simulation_config(const RunOptions& opt, const Matrix& sigma0);

bool same_config(const RunConfig& a, const RunConfig& b);

}  // namespace covsteer
