#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sc {

// Runs the sae-circuit command line. args excludes the program name.
// Returns the process exit code; normal output goes to `out`, errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sc
