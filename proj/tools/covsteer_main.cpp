#include "covsteer/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Optimal covariance steering with multiplicative noise"};
  app.require_subcommand(1);
  std::string config;
  covsteer::CommandOverrides ov;
  std::string out;
  std::uint64_t seed = 0;
  long paths = 0;
  int grid = 0;

  const char* commands[][2] = {
      {"validate", "Check the system and boundary data"},
      {"classify", "Report controllability on the grid"},
      {"solve", "Solve for the optimal gain schedule"},
      {"construct", "Build a feasible (non-optimal) steering"},
      {"simulate", "Monte Carlo run of the optimal closed loop"},
      {"certify", "Solve, simulate, and compare terminal covariance"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--paths", paths, "Number of Monte Carlo paths");
    sub->add_option("--grid", grid, "Time grid size");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : covsteer::kExitConfig;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out")) ov.out = out;
  if (sub->count("--seed")) ov.seed = seed;
  if (sub->count("--paths")) ov.paths = paths;
  if (sub->count("--grid")) ov.grid = grid;
  return covsteer::run_command(sub->get_name(), config, ov, std::cout, std::cerr);
}
