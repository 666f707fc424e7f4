#include "covsteer/cli.hpp"
#include "covsteer/config.hpp"
#include "covsteer/controllability.hpp"
#include "covsteer/errors.hpp"
#include "covsteer/riccati.hpp"
#include "covsteer/sde_sim.hpp"
#include "covsteer/steering.hpp"
#include "covsteer/transition.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace covsteer;

PYBIND11_MODULE(_covsteer, m) {
  m.doc() = "Optimal covariance steering with multiplicative noise";

  py::register_exception<Error>(m, "CovsteerError");

  py::class_<MatrixPoly>(m, "MatrixPoly")
      .def(py::init<int, int, std::vector<std::vector<double>>>(), py::arg("rows"), py::arg("cols"), py::arg("coeffs"))
      .def_static("constant", &MatrixPoly::constant)
      .def_static("scalar", &MatrixPoly::scalar)
      .def_property_readonly("rows", &MatrixPoly::rows)
      .def_property_readonly("cols", &MatrixPoly::cols)
      .def_property_readonly("coeffs", &MatrixPoly::coeffs)
      .def("degree", &MatrixPoly::degree)
      .def("evaluate", &MatrixPoly::evaluate, py::arg("t"), py::arg("order") = 0)
      .def("__call__", &MatrixPoly::operator());

  py::class_<SystemSpec>(m, "SystemSpec")
      .def(py::init<>())
      .def_readwrite("n", &SystemSpec::n)
      .def_readwrite("p", &SystemSpec::p)
      .def_readwrite("q", &SystemSpec::q)
      .def_readwrite("A", &SystemSpec::A)
      .def_readwrite("B", &SystemSpec::B)
      .def_readwrite("C", &SystemSpec::C)
      .def_readwrite("D", &SystemSpec::D)
      .def_readwrite("nu", &SystemSpec::nu)
      .def_readwrite("Q", &SystemSpec::Q)
      .def_readwrite("R", &SystemSpec::R);

  py::class_<BoundaryData>(m, "BoundaryData")
      .def(py::init<Matrix, Matrix>(), py::arg("Sigma0"), py::arg("Sigma1"))
      .def_readwrite("Sigma0", &BoundaryData::Sigma0)
      .def_readwrite("Sigma1", &BoundaryData::Sigma1);

  py::enum_<NoiseKind>(m, "NoiseKind").value("wiener", NoiseKind::wiener).value("compound_poisson", NoiseKind::compound_poisson);

  py::class_<NoiseComponent>(m, "NoiseComponent")
      .def(py::init<>())
      .def_readwrite("channel", &NoiseComponent::channel)
      .def_readwrite("kind", &NoiseComponent::kind)
      .def_readwrite("rate", &NoiseComponent::rate)
      .def_readwrite("jump_std", &NoiseComponent::jump_std);

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init<>())
      .def_readwrite("q", &NoiseModel::q)
      .def_readwrite("additive", &NoiseModel::additive)
      .def_readwrite("multiplicative", &NoiseModel::multiplicative);

  py::class_<RunConfig>(m, "RunConfig")
      .def_readwrite("system", &RunConfig::system)
      .def_readwrite("noise", &RunConfig::noise)
      .def_readwrite("boundary", &RunConfig::boundary)
      .def_readwrite("output_dir", &RunConfig::output_dir);
  m.def("parse_config", &parse_config);
  m.def("load_config", &load_config);
  m.def("emit_config", &emit_config);
  m.def("same_config", &same_config);

  m.def("validate_system", [](const SystemSpec& sys) {
    const ValidationReport rep = validate_system(sys);
    std::vector<std::string> messages;
    for (const auto& i : rep.issues) messages.push_back(i.message);
    return messages;
  });

  m.def(
      "transition_blocks",
      [](const SystemSpec& sys, double t, double s) {
        const TransitionBlocks b = transition_blocks(sys, t, s);
        return py::make_tuple(b.phi11, b.phi12, b.phi21, b.phi22);
      },
      py::arg("sys"), py::arg("t"), py::arg("s"));

  m.def("solve_closed_form", [](const SystemSpec& sys, double s, const Matrix& pi_s, double t) {
    return solve_closed_form(sys, s, pi_s, t);
  });

  m.def("map_f", &map_f, py::arg("sys"), py::arg("sigma0"), py::arg("pi0"));
  m.def(
      "jacobian_f", [](const SystemSpec& sys, const Matrix& sigma0, const Matrix& pi0) { return jacobian_f(sys, sigma0, pi0).jac; },
      py::arg("sys"), py::arg("sigma0"), py::arg("pi0"));
  m.def(
      "special_case_pi0", [](const SystemSpec& sys, const BoundaryData& bd) { return special_case_pi0(sys, bd); },
      py::arg("sys"), py::arg("bd"));

  py::class_<SteeringSolution>(m, "SteeringSolution")
      .def_readonly("Pi0", &SteeringSolution::Pi0)
      .def_readonly("times", &SteeringSolution::times)
      .def_readonly("pi", &SteeringSolution::pi)
      .def_readonly("gain", &SteeringSolution::gain)
      .def_readonly("sigma", &SteeringSolution::sigma)
      .def_readonly("optimal_cost", &SteeringSolution::optimal_cost)
      .def_readonly("residual", &SteeringSolution::residual);
  m.def(
      "solve_boundary",
      [](const SystemSpec& sys, const BoundaryData& bd, int grid_size) {
        SteeringOptions opt;
        opt.grid_size = grid_size;
        return solve_boundary(sys, bd, opt);
      },
      py::arg("sys"), py::arg("bd"), py::arg("grid_size") = 101);

  m.def(
      "classify",
      [](const SystemSpec& sys, int grid_size) {
        const ControllabilityReport r = classify(sys, grid_size);
        py::dict d;
        d["totally_controllable"] = r.totally_controllable;
        d["uniformly_controllable"] = r.uniformly_controllable;
        d["index_invariant"] = r.index_invariant;
        d["theta_ranks"] = r.theta_ranks;
        return d;
      },
      py::arg("sys"), py::arg("grid_size") = 101);

  m.def("derive_intensities", [](const NoiseModel& noise) {
    const Intensities in = derive_intensities(noise);
    return py::make_tuple(in.D, in.nu);
  });

  m.def(
      "simulate",
      [](const SystemSpec& sys, const NoiseModel& noise, const SteeringSolution& sol, const Matrix& sigma0, long num_paths,
         double step_size, std::uint64_t seed, int threads) {
        SimulationConfig cfg;
        cfg.num_paths = num_paths;
        cfg.step_size = step_size;
        cfg.master_seed = seed;
        cfg.Sigma0 = sigma0;
        cfg.threads = threads;
        SimulationResult r;
        {
          py::gil_scoped_release release;
          r = simulate_paths(sys, noise, {sol.times, sol.gain}, cfg);
        }
        const Moments end = empirical_moments(r, 1.0);
        const CostEstimate cost = estimate_cost(sys, r);
        py::dict d;
        d["mean"] = end.mean;
        d["cov"] = end.cov;
        d["cost"] = cost.mean;
        d["cost_half_width"] = cost.half_width;
        d["mean_jump_count"] = r.jump_count.mean(0);
        d["checkpoint_times"] = r.checkpoint_times;
        return d;
      },
      py::arg("sys"), py::arg("noise"), py::arg("solution"), py::arg("sigma0"), py::arg("num_paths") = 10000,
      py::arg("step_size") = 1e-3, py::arg("seed") = 0, py::arg("threads") = 0);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config, std::optional<std::string> out,
         std::optional<std::uint64_t> seed, std::optional<long> paths, std::optional<int> grid) {
        std::ostringstream so, se;
        const int code = run_command(command, config, {out, seed, paths, grid}, so, se);
        return py::make_tuple(code, so.str(), se.str());
      },
      py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      py::arg("paths") = py::none(), py::arg("grid") = py::none());
}
