#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace voiceloop {

/// Runs the command line tool. `args` excludes the program name.
/// Exit codes: 0 success, 1 runtime or IO failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace voiceloop
