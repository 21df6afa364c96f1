#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vtank {

struct ProcessOptions {
  std::string stdin_data;
  std::filesystem::path cwd;
  std::map<std::string, std::string> env;  // added to the inherited environment
};

struct ProcessResult {
  int exit_code = -1;   // -1 when the child was killed by a signal
  int signal = 0;
  std::string out;
  std::string err;

  bool ok() const { return exit_code == 0; }
};

/// Runs argv[0] (PATH lookup) to completion, capturing stdout and stderr.
/// Throws Error(Io) only if the process cannot be spawned.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

/// Single-quotes `s` for POSIX sh.
std::string shell_quote(std::string_view s);

/// Absolute path of the running executable.
std::filesystem::path self_executable();

}  // namespace vtank
