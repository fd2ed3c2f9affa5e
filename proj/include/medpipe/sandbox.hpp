#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace medpipe {

namespace fs = std::filesystem;

struct SandboxLimits {
  std::chrono::milliseconds script_timeout = std::chrono::seconds(900);
  std::uintmax_t read_cap = 2u << 20;      // bytes readable through read_files
  std::size_t output_cap = 64u << 10;      // tail of run_script output kept
  std::set<std::string> code_extensions = {"py", "sh", "json", "md", "yaml",
                                           "txt", "rs", "cpp", "java"};
};

/// Filesystem scope of one run. Writes must resolve inside `root`; reads may
/// also reach the read-only allowlist (dataset roots, reference templates).
/// Resolution follows every symlink, dangling ones included, before the
/// containment check.
class Sandbox {
 public:
  explicit Sandbox(const fs::path& root, std::vector<fs::path> read_allowlist = {},
                   SandboxLimits limits = {});

  const fs::path& root() const noexcept { return root_; }
  const std::vector<fs::path>& read_allowlist() const noexcept { return allowlist_; }
  const SandboxLimits& limits() const noexcept { return limits_; }
  SandboxLimits& limits() noexcept { return limits_; }

  fs::path resolve_read(std::string_view path) const;
  fs::path resolve_write(std::string_view path) const;

  bool can_write(const fs::path& resolved) const;
  bool can_read(const fs::path& resolved) const;

 private:
  fs::path resolve(std::string_view path) const;

  fs::path root_;
  std::vector<fs::path> allowlist_;
  SandboxLimits limits_;
};

/// Absolute path with every symlink component resolved; components that do
/// not exist are taken lexically.
fs::path resolve_real_path(const fs::path& path);

bool path_within(const fs::path& root, const fs::path& path);

}  // namespace medpipe
