#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ucov/ir.hpp"

namespace ucov::cli {

/// Runs one `ucov` command line. `args` excludes the program name.
/// Exit codes: 0 success, 1 input error or failing test, 2 uncovered
/// requirement or migration issue.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// Loads `.mls` (compiled), `.uasm` (assembled) or `.ubc` by extension.
ProgramModule load_program(const std::string &path);
std::string read_file(const std::string &path);

} // namespace ucov::cli
