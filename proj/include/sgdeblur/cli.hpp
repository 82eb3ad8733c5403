#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sgdeblur {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,  // training divergence, inadmissible k
  kExitInput = 2,    // I/O, config or checkpoint problems
};

/// Entry point behind the `sgdeblur` binary. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sgdeblur
