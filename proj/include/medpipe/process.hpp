#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>

namespace medpipe {

struct ProcessResult {
  int exit_code = 0;  // 128 + signal number when the shell was killed
  bool timed_out = false;
  std::chrono::milliseconds elapsed{0};
  std::string output;  // merged stdout/stderr, tail only when truncated
  std::size_t total_bytes = 0;
  bool truncated = false;
};

/// Runs `command` through /bin/sh in its own process group with stdin bound
/// to /dev/null. On timeout the whole group is killed.
ProcessResult run_shell(const std::string& command, const std::filesystem::path& cwd,
                        std::chrono::milliseconds timeout, std::size_t output_cap);

}  // namespace medpipe
