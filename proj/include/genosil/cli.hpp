#pragma once

// Command-line front end: generate, train, eval, inspect.
//
// Every subcommand accepts --config FILE (JSON, "schema_version": 1); the
// accepted keys are listed in the README. Flags given on the command line
// override file values. Unknown keys are rejected before anything is written.
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <iosfwd>

namespace genosil {

inline constexpr int kCliSchemaVersion = 1;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace genosil
