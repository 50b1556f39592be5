#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "goemo/config.hpp"

namespace goemo::cli {

std::vector<std::string> command_names();

/// Defaults and accepted keys of `command`.
RunConfig make_config(const std::string& command);

/// Runs one resolved command, writing machine-readable results to `out`.
/// Returns the exit status; failures surface as goemo::Error.
int run_command(const RunConfig& config, std::ostream& out);

/// Full entry point: parses arguments, applies the config file and then the
/// flags, runs the command, and maps errors to exit codes.
int main(int argc, char** argv);

}  // namespace goemo::cli
