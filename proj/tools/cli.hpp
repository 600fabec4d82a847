#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tws::cli {

/// Runs one subcommand. `args` excludes the program name. Returns the
/// process exit code: 0 on success, 2 for usage errors, 1 for data errors.
/// Failures print a one-line JSON object {stage, code, message} to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tws::cli
