#pragma once

#include <string>
#include <vector>

namespace evade {

/// Entry point behind the `evade` binary. Subcommands: run, warmup,
/// gradcheck, oracle, layout. Returns a process exit code; flag errors
/// produce a usage message and a nonzero code.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace evade
