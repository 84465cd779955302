#pragma once

#include <map>
#include <string>
#include <vector>

#include "rbmcli/config.hpp"

namespace rbmcli {

struct EmittedFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

struct CommandResult {
  std::string name;
  std::string status;  // ok | failed | error
  bool assertion = false;
  std::string message;
  std::vector<EmittedFile> files;
};

/// Runs one command. Files are produced in memory and written under
/// out/<command>/ only once the command has finished, so an exception leaves
/// no partial output behind.
CommandResult run_command(const std::string& name, const RunConfig& config);

struct RunReport {
  std::vector<CommandResult> results;
  int exit_status = 0;
};

/// Runs the commands in order and writes out/summary.json. Exit status 1 when
/// an assertion-bearing command failed or any command raised.
RunReport run_all(const RunConfig& config, const std::vector<std::string>& commands,
                  const std::string& config_canonical);

}  // namespace rbmcli
