#pragma once

#include <iosfwd>

namespace feedsim::cli {

enum ExitCode : int { ok = 0, usage = 1, config = 2, runtime = 3 };

/// Entry point of the feedsim command; output goes to the given streams.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace feedsim::cli
