#include "covsteer/cli.hpp"

#include "covsteer/config.hpp"
#include "covsteer/controllability.hpp"
#include "covsteer/csv.hpp"
#include "covsteer/errors.hpp"
#include "covsteer/sde_sim.hpp"
#include "covsteer/steering.hpp"

#include "json.hpp"

#include <filesystem>
#include <ostream>

namespace covsteer {

using json = nlohmann::ordered_json;

namespace {

json to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::string> matrix_header(const std::string& name, int rows, int cols) {
  std::vector<std::string> h;
  for (int i = 1; i <= rows; ++i)
    for (int j = 1; j <= cols; ++j) h.push_back(name + "_" + std::to_string(i) + "_" + std::to_string(j));
  return h;
}

void append_row_major(std::vector<double>& row, const Matrix& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
}

CsvTable matrix_series(const std::string& name, const std::vector<double>& times, const std::vector<Matrix>& values) {
  CsvTable t;
  t.header = {"t"};
  const auto h = matrix_header(name, values.front().rows(), values.front().cols());
  t.header.insert(t.header.end(), h.begin(), h.end());
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::vector<double> row{times[k]};
    append_row_major(row, values[k]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string path_in(const RunConfig& cfg, const std::string& file) {
  return (std::filesystem::path(cfg.output_dir) / file).string();
}

void write_json(const RunConfig& cfg, const std::string& file, const json& j) {
  write_file_atomic(path_in(cfg, file), j.dump(2) + "\n");
}

void write_csv(const RunConfig& cfg, const std::string& file, const CsvTable& t) {
  write_file_atomic(path_in(cfg, file), t.str());
}

const BoundaryData& need_boundary(const RunConfig& cfg) {
  if (!cfg.boundary) throw ConfigError("this command needs a 'boundary' section");
  return *cfg.boundary;
}

const NoiseModel& need_noise(const RunConfig& cfg) {
  if (!cfg.noise) throw ConfigError("this command needs a 'noise' section");
  return *cfg.noise;
}

void require_valid(const SystemSpec& sys) {
  const ValidationReport rep = validate_system(sys);
  if (!rep.passed()) throw PreconditionError(rep.issues.front().message);
}

json report_json(const ControllabilityReport& rep) {
  return {{"grid_times", rep.grid_times},
          {"theta_ranks", rep.theta_ranks},
          {"totally_controllable", rep.totally_controllable},
          {"uniformly_controllable", rep.uniformly_controllable},
          {"index_invariant", rep.index_invariant},
          {"witnesses", rep.witnesses},
          {"probes_per_subinterval", rep.probes_per_subinterval}};
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const ValidationReport rep = validate_system(cfg.system);
  json issues = json::array();
  for (const auto& i : rep.issues) issues.push_back({{"field", i.field}, {"time", i.time}, {"message", i.message}});
  std::string boundary = "absent";
  if (cfg.boundary) {
    try {
      check_boundary(*cfg.boundary, cfg.system.n);
      boundary = "ok";
    } catch (const Error& e) {
      boundary = e.what();
    }
  }
  write_json(cfg, "validation.json",
             {{"passed", rep.passed()}, {"grid_points", rep.grid_points}, {"issues", issues}, {"boundary", boundary}});
  for (const auto& i : rep.issues) out << i.message << "\n";
  const bool boundary_ok = boundary == "ok" || boundary == "absent";
  if (!boundary_ok) out << "boundary: " << boundary << "\n";
  const bool ok = rep.passed() && boundary_ok;
  out << (ok ? "valid" : "invalid") << "\n";
  return ok ? kExitOk : kExitPrecondition;
}

int cmd_classify(const RunConfig& cfg, std::ostream& out) {
  const auto rep = classify(cfg.system, cfg.options.classify_grid, cfg.options.classify_probes);
  write_json(cfg, "classify.json", report_json(rep));
  out << "uniform: " << std::boolalpha << rep.uniformly_controllable << "\ntotal: " << rep.totally_controllable
      << "\nindex_invariant: " << rep.index_invariant << "\n";
  return kExitOk;
}

SteeringSolution solve_checked(const RunConfig& cfg) {
  const BoundaryData& bd = need_boundary(cfg);
  require_valid(cfg.system);
  check_boundary(bd, cfg.system.n);
  const auto rep = classify(cfg.system, cfg.options.classify_grid, cfg.options.classify_probes);
  if (!rep.totally_controllable) throw NotControllableError("not totally controllable");
  return solve_boundary(cfg.system, bd, steering_options(cfg.options));
}

void write_solution(const RunConfig& cfg, const SteeringSolution& sol) {
  write_csv(cfg, "gain.csv", matrix_series("K", sol.times, sol.gain));
  write_csv(cfg, "covariance.csv", matrix_series("sigma", sol.times, sol.sigma));
  write_csv(cfg, "pi.csv", matrix_series("pi", sol.times, sol.pi));
  write_json(cfg, "cost.json",
             {{"optimal_cost", sol.optimal_cost},
              {"residual", sol.residual},
              {"newton_iterations", sol.newton_trace.size()},
              {"Pi0", to_json(sol.Pi0)}});
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  const SteeringSolution sol = solve_checked(cfg);
  write_solution(cfg, sol);
  out << "optimal cost: " << format_number(sol.optimal_cost) << "\nresidual: " << format_number(sol.residual)
      << "\nnewton iterations: " << sol.newton_trace.size() << "\n";
  return kExitOk;
}

int cmd_construct(const RunConfig& cfg, std::ostream& out) {
  const SystemSpec& sys = cfg.system;
  const BoundaryData& bd = need_boundary(cfg);
  require_valid(sys);
  if (!sys.A.is_constant() || !sys.B.is_constant()) throw PreconditionError("construct needs constant A and B");
  if (!sys.channels.empty()) throw PreconditionError("construct does not support extra multiplicative channels");
  const MatrixPoly M = sys.C * sys.D * sys.C.transpose();
  const FeasibleSteering fs = construct_feasible_steering(sys.A(0.0), sys.B(0.0), bd, M, sys.nu,
                                                          cfg.options.construct_order, cfg.options.grid_size);
  write_csv(cfg, "construct_gain.csv", matrix_series("K", fs.times, fs.gain));
  write_csv(cfg, "construct_covariance.csv", matrix_series("sigma", fs.times, fs.sigma));
  json layers = json::array();
  for (const auto& l : fs.layers)
    layers.push_back({{"size", l.size}, {"gamma", l.gamma}, {"a", l.a}, {"b", l.b}, {"c0", l.c0}, {"d0", l.d0}});
  write_json(cfg, "construct.json",
             {{"endpoint_error", fs.endpoint_error},
              {"T", to_json(fs.transform.T)},
              {"F", to_json(fs.transform.F)},
              {"v", to_json(fs.transform.v)},
              {"layers", layers}});
  out << "endpoint error: " << format_number(fs.endpoint_error) << "\n";
  return kExitOk;
}

struct SimulationRun {
  SteeringSolution sol;
  SimulationResult result;
};

SimulationRun simulate_optimal(const RunConfig& cfg) {
  const NoiseModel& noise = need_noise(cfg);
  SimulationRun run;
  run.sol = solve_checked(cfg);
  write_solution(cfg, run.sol);
  run.result = simulate_paths(cfg.system, noise, {run.sol.times, run.sol.gain},
                              simulation_config(cfg.options, cfg.boundary->Sigma0));
  const SimulationResult& r = run.result;
  const int n = r.n;

  CsvTable moments;
  moments.header = {"t"};
  for (int i = 1; i <= n; ++i) moments.header.push_back("mean_" + std::to_string(i));
  const auto ch = matrix_header("cov", n, n);
  moments.header.insert(moments.header.end(), ch.begin(), ch.end());
  for (std::size_t c = 0; c < r.checkpoint_times.size(); ++c) {
    const Moments m = moments_of(r.moments[c]);
    std::vector<double> row{r.checkpoint_times[c]};
    for (int i = 0; i < n; ++i) row.push_back(m.mean(i));
    append_row_major(row, m.cov);
    moments.rows.push_back(std::move(row));
  }
  write_csv(cfg, "moments.csv", moments);

  CsvTable env;
  env.header = {"t"};
  for (const char* part : {"mean", "lower", "upper"})
    for (int i = 1; i <= n; ++i) env.header.push_back(std::string(part) + "_" + std::to_string(i));
  for (const auto& e : envelope(r)) {
    std::vector<double> row{e.t};
    for (const Vector* v : {&e.mean, &e.lower, &e.upper})
      for (int i = 0; i < n; ++i) row.push_back((*v)(i));
    env.rows.push_back(std::move(row));
  }
  write_csv(cfg, "envelope.csv", env);

  if (!r.paths.empty()) {
    CsvTable paths;
    paths.header = {"t", "path_id"};
    for (int i = 1; i <= n; ++i) paths.header.push_back("x_" + std::to_string(i));
    for (int i = 1; i <= r.p; ++i) paths.header.push_back("u_" + std::to_string(i));
    for (std::size_t k = 0; k < r.step_times.size(); ++k) {
      for (const auto& path : r.paths) {
        std::vector<double> row{r.step_times[k], static_cast<double>(path.path_id)};
        for (int i = 0; i < n; ++i) row.push_back(path.x[k](i));
        for (int i = 0; i < r.p; ++i) row.push_back(path.u[k](i));
        paths.rows.push_back(std::move(row));
      }
    }
    write_csv(cfg, "paths.csv", paths);
  }

  const CostEstimate cost = estimate_cost(cfg.system, r);
  write_json(cfg, "simulation.json",
             {{"num_paths", r.num_paths},
              {"step_size", r.step_size},
              {"master_seed", r.master_seed},
              {"cost_estimate", cost.mean},
              {"cost_half_width", cost.half_width},
              {"optimal_cost", run.sol.optimal_cost},
              {"mean_jump_count", r.jump_count.mean(0)},
              {"terminal_mean", to_json(empirical_moments(r, 1.0).mean)},
              {"terminal_cov", to_json(empirical_moments(r, 1.0).cov)}});
  return run;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const SimulationRun run = simulate_optimal(cfg);
  const Moments m = empirical_moments(run.result, 1.0);
  const CostEstimate cost = estimate_cost(cfg.system, run.result);
  out << "paths: " << run.result.num_paths << "\nterminal covariance:\n" << m.cov << "\ncost estimate: "
      << format_number(cost.mean) << " +- " << format_number(cost.half_width) << "\n";
  return kExitOk;
}

int cmd_certify(const RunConfig& cfg, std::ostream& out) {
  const SimulationRun run = simulate_optimal(cfg);
  const Matrix& target = cfg.boundary->Sigma1;
  const Moments m = empirical_moments(run.result, 1.0);
  const double rel = (m.cov - target).norm() / target.norm();
  const bool pass = rel <= cfg.options.certify_tol;
  const std::string verdict = std::string(pass ? "PASS" : "FAIL") + " (≤" + format_number(cfg.options.certify_tol * 100.0) + "%)";
  write_json(cfg, "certify.json", {{"verdict", verdict}, {"relative_error", rel}, {"tolerance", cfg.options.certify_tol}});
  out << "covariance relative error: " << format_number(rel) << "\n" << verdict << "\n";
  return pass ? kExitOk : kExitMismatch;
}

}  // namespace

int run_command(const std::string& command, const std::string& config_path, const CommandOverrides& ov,
                std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg = load_config(config_path);
    if (ov.out) cfg.output_dir = *ov.out;
    if (ov.seed) cfg.options.seed = *ov.seed;
    if (ov.paths) {
      if (*ov.paths < 1) throw ConfigError("--paths must be >= 1");
      cfg.options.num_paths = *ov.paths;
    }
    if (ov.grid) {
      if (*ov.grid < 2) throw ConfigError("--grid must be >= 2");
      cfg.options.grid_size = *ov.grid;
    }
    if (command == "validate") return cmd_validate(cfg, out);
    if (command == "classify") return cmd_classify(cfg, out);
    if (command == "solve") return cmd_solve(cfg, out);
    if (command == "construct") return cmd_construct(cfg, out);
    if (command == "simulate") return cmd_simulate(cfg, out);
    if (command == "certify") return cmd_certify(cfg, out);
    throw ConfigError("unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InconsistencyError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StepSizeError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NoConvergenceError& e) {
    err << "no convergence: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const Error& e) {
    err << "precondition violated: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace covsteer
