#pragma once

#include <string>
#include <vector>

namespace rotir::cli {

// Runs one CLI invocation (args exclude the program name).
// Exit codes: 0 success, 2 invalid config or usage, 3 numerical failure,
// 4 I/O failure.
int run(const std::vector<std::string>& args);

}  // namespace rotir::cli
