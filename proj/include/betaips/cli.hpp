#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace betaips {

// Entry point of the `betaips` command-line tool. `args` excludes the program
// name. Returns 0 on success, 2 on a usage/config error and 1 on a runtime
// (numeric or I/O) error. Diagnostics and the effective-config digest go to
// `err`; human-readable summaries go to `out`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err);

}  // namespace betaips
