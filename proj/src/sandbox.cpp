#include "medpipe/sandbox.hpp"

#include <fmt/format.h>

#include <deque>

#include "medpipe/error.hpp"

namespace medpipe {

namespace {
constexpr int kMaxSymlinkHops = 40;
}

fs::path resolve_real_path(const fs::path& path) {
  const auto absolute = path.is_absolute() ? path : fs::absolute(path);
  std::deque<fs::path> pending(absolute.begin(), absolute.end());
  fs::path current = absolute.root_path();
  int hops = 0;
  while (!pending.empty()) {
    const auto part = pending.front();
    pending.pop_front();
    if (part.empty() || part == "." || part == absolute.root_path() || part == "/") continue;
    if (part == "..") {
      current = current.parent_path();
      continue;
    }
    const auto next = current / part;
    std::error_code ec;
    const auto status = fs::symlink_status(next, ec);
    if (!ec && fs::is_symlink(status)) {
      if (++hops > kMaxSymlinkHops) {
        throw Error(ErrorCode::sandbox, fmt::format("too many symlink levels in {}", path.string()));
      }
      const auto target = fs::read_symlink(next);
      if (target.is_absolute()) current = target.root_path();
      std::vector<fs::path> parts(target.begin(), target.end());
      for (auto it = parts.rbegin(); it != parts.rend(); ++it) pending.push_front(*it);
      continue;
    }
    current = next;
  }
  return current;
}

bool path_within(const fs::path& root, const fs::path& path) {
  auto r = root.begin();
  auto p = path.begin();
  for (; r != root.end(); ++r, ++p) {
    if (r->empty()) continue;  // trailing separator
    if (p == path.end() || *r != *p) return false;
  }
  return true;
}

Sandbox::Sandbox(const fs::path& root, std::vector<fs::path> read_allowlist, SandboxLimits limits)
    : limits_(std::move(limits)) {
  fs::create_directories(root);
  root_ = fs::canonical(root);
  for (const auto& entry : read_allowlist) allowlist_.push_back(resolve_real_path(entry));
}

fs::path Sandbox::resolve(std::string_view path) const {
  if (path.empty()) throw Error(ErrorCode::invalid_argument, "empty path");
  fs::path p{std::string(path)};
  if (p.is_relative()) p = root_ / p;
  return resolve_real_path(p);
}

bool Sandbox::can_write(const fs::path& resolved) const { return path_within(root_, resolved); }

bool Sandbox::can_read(const fs::path& resolved) const {
  if (can_write(resolved)) return true;
  for (const auto& allowed : allowlist_) {
    if (path_within(allowed, resolved)) return true;
  }
  return false;
}

fs::path Sandbox::resolve_read(std::string_view path) const {
  auto resolved = resolve(path);
  if (!can_read(resolved)) {
    throw Error(ErrorCode::sandbox,
                fmt::format("sandbox violation: {} is outside the readable scope", path));
  }
  return resolved;
}

fs::path Sandbox::resolve_write(std::string_view path) const {
  auto resolved = resolve(path);
  if (!can_write(resolved)) {
    throw Error(ErrorCode::sandbox,
                fmt::format("sandbox violation: {} resolves outside the sandbox root", path));
  }
  return resolved;
}

}  // namespace medpipe
