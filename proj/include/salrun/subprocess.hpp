#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace salrun {

struct ProcessResult {
  int exit_code = -1;       // valid when !timed_out && !signaled
  bool timed_out = false;
  bool signaled = false;
  std::string out;
  std::string err;
};

/// Runs argv[0] (PATH lookup) in its own process group with exactly `env` as its
/// environment and `cwd` as working directory, feeding `input` on stdin.
/// On timeout the whole process group is killed and reaped. Throws LaunchError
/// when the program cannot be executed.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::map<std::string, std::string>& env,
                          const std::filesystem::path& cwd, const std::string& input,
                          std::chrono::milliseconds timeout);

}  // namespace salrun
