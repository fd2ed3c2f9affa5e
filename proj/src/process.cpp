#include "medpipe/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "medpipe/error.hpp"

namespace medpipe {

namespace {

class TailBuffer {
 public:
  explicit TailBuffer(std::size_t cap) : cap_(cap) {}

  void append(const char* data, std::size_t n) {
    total_ += n;
    buf_.append(data, n);
    // Trim lazily so the amortized cost stays linear.
    if (buf_.size() > 2 * cap_ + 4096) buf_.erase(0, buf_.size() - cap_);
  }

  std::string take() {
    if (buf_.size() > cap_) buf_.erase(0, buf_.size() - cap_);
    return std::move(buf_);
  }

  std::size_t total() const { return total_; }

 private:
  std::size_t cap_;
  std::size_t total_ = 0;
  std::string buf_;
};

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

ProcessResult run_shell(const std::string& command, const std::filesystem::path& cwd,
                        std::chrono::milliseconds timeout, std::size_t output_cap) {
  using clock = std::chrono::steady_clock;
  int fds[2];
  if (pipe2(fds, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::io, fmt::format("pipe failed: {}", std::strerror(errno)));
  }
  const auto start = clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw Error(ErrorCode::io, fmt::format("fork failed: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    setpgid(0, 0);
    const int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    dup2(fds[1], STDOUT_FILENO);
    dup2(fds[1], STDERR_FILENO);
    if (chdir(cwd.c_str()) != 0) _exit(126);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(fds[1]);

  ProcessResult result;
  TailBuffer tail(output_cap);
  const auto deadline = start + timeout;
  bool exited = false;
  int status = 0;
  bool pipe_open = true;
  char chunk[8192];

  auto reap = [&](int flags) {
    if (exited) return;
    const pid_t r = waitpid(pid, &status, flags);
    if (r == pid) exited = true;
  };

  // Once the shell itself has exited, leftover background children get a
  // short grace period to flush before the group is killed.
  auto grace_deadline = clock::time_point::max();
  while (pipe_open) {
    const auto now = clock::now();
    if (!exited && now >= deadline) {
      result.timed_out = true;
      break;
    }
    if (exited && now >= grace_deadline) break;
    const auto limit = exited ? grace_deadline : deadline;
    const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(limit - now).count();
    pollfd pfd{fds[0], POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::clamp<long long>(wait_ms, 0, 50)));
    if (ready > 0) {
      const ssize_t n = read(fds[0], chunk, sizeof chunk);
      if (n > 0) {
        tail.append(chunk, static_cast<std::size_t>(n));
      } else if (n == 0) {
        pipe_open = false;
      } else if (errno != EINTR && errno != EAGAIN) {
        pipe_open = false;
      }
    } else if (ready < 0 && errno != EINTR) {
      pipe_open = false;
    }
    if (!exited) {
      reap(WNOHANG);
      if (exited) grace_deadline = clock::now() + std::chrono::milliseconds(200);
    }
  }

  kill(-pid, SIGKILL);
  close(fds[0]);
  reap(0);

  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start);
  result.total_bytes = tail.total();
  result.truncated = tail.total() > output_cap;
  result.output = tail.take();
  result.exit_code = result.timed_out ? 124 : decode_status(status);
  return result;
}

}  // namespace medpipe
