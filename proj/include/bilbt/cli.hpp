#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bilbt {

/// Runs the command-line tool on the given arguments (program name
/// excluded), writing to the supplied streams. Exit status: 0 success,
/// 1 usage error, 2 malformed input file or spec, 3 numerical failure.
/// Kept callable from tests so artifact determinism can be checked
/// byte for byte.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bilbt
