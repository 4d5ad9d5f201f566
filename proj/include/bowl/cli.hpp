#pragma once

#include <ostream>

namespace bowl {

// Entry point of the bowlkit command line. Results go to `out`, diagnostics
// to `err` as "bowlkit: error[<kind>]: <message>". Returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bowl
