#include "test_support.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace testsupport {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  auto base = fs::temp_directory_path();
  for (;;) {
    auto candidate = base / ("medpipe-test-" + std::to_string(::getpid()) + "-" +
                             std::to_string(counter++));
    std::error_code ec;
    if (fs::create_directory(candidate, ec)) {
      path_ = fs::canonical(candidate);
      return;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
}

std::map<std::string, std::string> tree_snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  std::error_code ec;
  if (!fs::exists(root, ec)) return out;
  for (auto it = fs::recursive_directory_iterator(root, ec); it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    const auto rel = it->path().lexically_relative(root).generic_string();
    if (it->is_symlink(ec)) {
      out[rel] = "symlink -> " + fs::read_symlink(it->path(), ec).string();
    } else if (it->is_regular_file(ec)) {
      out[rel] = slurp(it->path());
    } else if (it->is_directory(ec)) {
      out[rel + "/"] = "";
    }
  }
  return out;
}

bool python3_available() { return std::system("python3 -c 'pass' >/dev/null 2>&1") == 0; }

}  // namespace testsupport
