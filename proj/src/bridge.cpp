#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include "roost/model.hpp"

extern char** environ;

namespace roost {

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

}  // namespace

std::string format_bridge_request(double beta, std::span<const double> x) {
  std::string line = "logd ";
  append_double(line, beta);
  for (double v : x) {
    line += ' ';
    append_double(line, v);
  }
  line += '\n';
  return line;
}

double parse_bridge_response(const std::string& line) {
  std::string s = line;
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  if (s == "-inf") return kNegInf;
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw EvaluationError("bridge: malformed log density response: \"" + line + "\"");
  return v;
}

struct BridgeProcess::Impl {
  std::vector<std::string> command;
  std::size_t dimension = 0;
  std::chrono::milliseconds timeout;
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;
  std::mutex mutex;

  ~Impl() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    if (pid <= 0) return;
    int status = 0;
    // Closing stdin asks the bridge to exit; give it a moment before forcing.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid, &status, WNOHANG) != 0) return;
      ::usleep(2000);
    }
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  }

  void write_all(const std::string& s) {
    std::size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::write(to_child, s.data() + off, s.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw EvaluationError("bridge: write to '" + command.front() + "' failed: " +
                              std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      if (auto nl = buffer.find('\n'); nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw TimeoutError("bridge: no response from '" + command.front() + "' within " +
                           std::to_string(timeout.count()) + " ms");
      pollfd p{from_child, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno != EINTR)
        throw EvaluationError(std::string("bridge: poll failed: ") + std::strerror(errno));
      if (rc <= 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(from_child, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0)
        throw EvaluationError("bridge: process '" + command.front() +
                              "' exited; partial output: \"" + buffer + "\"");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }
};

BridgeProcess::BridgeProcess(std::vector<std::string> command, std::size_t dimension,
                             std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>()) {
  if (command.empty()) throw ArgumentError("bridge: empty command");
  if (dimension < 1) throw ArgumentError("bridge: dimension must be positive");
  impl_->command = std::move(command);
  impl_->dimension = dimension;
  impl_->timeout = timeout;

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw EvaluationError(std::string("bridge: pipe failed: ") + std::strerror(errno));

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

  std::vector<char*> argv;
  for (auto& a : impl_->command) argv.push_back(a.data());
  argv.push_back(nullptr);
  const int rc = ::posix_spawnp(&impl_->pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  impl_->to_child = in_pipe[1];
  impl_->from_child = out_pipe[0];
  if (rc != 0) {
    impl_->pid = -1;
    throw EvaluationError("bridge: cannot start '" + impl_->command.front() +
                          "': " + std::strerror(rc));
  }
  // A dead bridge must surface as an error on write, not kill the engine.
  ::signal(SIGPIPE, SIG_IGN);

  impl_->write_all("hello " + std::to_string(dimension) + "\n");
  const std::string reply = impl_->read_line();
  if (reply != "ok" && reply != "ok\r")
    throw EvaluationError("bridge: expected \"ok\" handshake, got \"" + reply + "\"");
}

BridgeProcess::~BridgeProcess() = default;

std::size_t BridgeProcess::dimension() const { return impl_->dimension; }

double BridgeProcess::evaluate(double beta, std::span<const double> x) {
  if (x.size() != impl_->dimension)
    throw ArgumentError("bridge: state has dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(impl_->dimension));
  std::lock_guard lock(impl_->mutex);
  impl_->write_all(format_bridge_request(beta, x));
  return parse_bridge_response(impl_->read_line());
}

LogPotential child_process_target(std::vector<std::string> command, std::size_t dimension,
                                  std::chrono::milliseconds timeout) {
  auto process = std::make_shared<BridgeProcess>(std::move(command), dimension, timeout);
  return LogPotential(dimension, [process](std::span<const double> x) {
    return process->evaluate(1.0, x);
  });
}

Path child_process_path(std::vector<std::string> command, std::size_t dimension,
                        std::vector<double> initial, std::chrono::milliseconds timeout) {
  auto process = std::make_shared<BridgeProcess>(std::move(command), dimension, timeout);
  return Path::from_family(
      dimension,
      [process](double beta, std::span<const double> x) { return process->evaluate(beta, x); },
      std::move(initial));
}

}  // namespace roost
