#pragma once

#include <string>
#include <vector>

namespace lact::cli {

// Runs one subcommand. Returns 0 on success, 2 on bad arguments, 1 on
// runtime failure (with a message naming the failing stage on stderr).
int run(const std::vector<std::string>& args);

}  // namespace lact::cli
