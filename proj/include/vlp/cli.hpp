#pragma once

#include <iosfwd>

namespace vlp {

/// Command-line front end. Returns the process exit code:
/// 0 success, 1 validation or parse error, 2 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vlp
