#pragma once

#include <string>
#include <vector>

namespace mmgcd::cli {

// Entry point behind the executable: parses argv, validates the merged
// file+flag configuration before writing anything, runs the subcommand.
// Returns 0 on success, 1 on validation errors, 2 on runtime errors.
int run(const std::vector<std::string>& args);

}  // namespace mmgcd::cli
