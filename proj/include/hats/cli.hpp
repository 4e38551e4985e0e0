#pragma once

#include <iosfwd>

namespace hats {

/// Process exit codes of the `hats` tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitEnvironment = 2,
    kExitOracle = 3,
    kExitCorpus = 4,
    kExitAuditMismatch = 5,
};

/// Entry point of the `hats` tool; argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hats
