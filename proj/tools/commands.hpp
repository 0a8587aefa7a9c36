#pragma once

// The mfi command-line interface: gen, train, explain, morf and converge.

#include <iosfwd>
#include <string>
#include <vector>

#include "mfi/core.hpp"

namespace mfi::cli {

inline constexpr int exit_usage = 2;
inline constexpr int exit_unexpected = 3;

/// Exit status for a library error; distinct for every code and never 0-3.
int exit_code(ErrorCode code);

/// Runs one command. args excludes the program name. Help text goes to out,
/// diagnostics (one line per failure) and progress logs to err.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace mfi::cli
