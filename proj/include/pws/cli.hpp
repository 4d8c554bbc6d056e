#pragma once

#include <iosfwd>

namespace pws {

/// Entry point of the pwsim front end. Returns 0 on success, 2 on usage errors, 1 on runtime errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pws
