#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace covsteer {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitPrecondition = 2,
  kExitNoConvergence = 3,
  kExitMismatch = 4,
};

struct CommandOverrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<long> paths;
  std::optional<int> grid;
};

/// Runs validate | classify | solve | construct | simulate | certify and maps
/// failures to exit codes. Informational text goes to out, errors to err.
int run_command(const std::string& command, const std::string& config_path, const CommandOverrides& overrides,
                std::ostream& out, std::ostream& err);

}  // namespace covsteer
