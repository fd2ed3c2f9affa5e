#pragma once

#include <iosfwd>

namespace medpipe {

/// Exit codes: 0 success, 1 the command ran but was refused or the run did not
/// complete, 2 bad usage or configuration.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace medpipe
