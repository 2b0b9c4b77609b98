#pragma once

#include <string>
#include <vector>

namespace fga::cli {

/// Full command-line entry point. Returns the process exit code:
/// 0 success, 1 runtime failure (one machine-parsable "error: ..." line on
/// stderr), 2 usage errors.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

} // namespace fga::cli
