#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <iostream>

#include "roost/transport.hpp"

extern char** environ;

namespace roost {

namespace {

struct Child {
  int rank = 0;
  pid_t pid = -1;
  bool reaped = false;
  int status = 0;
};

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return std::string("signal ") + ::strsignal(WTERMSIG(status));
  return "unknown status";
}

void reap(Child& c, int options) {
  if (c.reaped) return;
  int status = 0;
  const pid_t rc = ::waitpid(c.pid, &status, options);
  if (rc == c.pid) {
    c.reaped = true;
    c.status = status;
  }
}

}  // namespace

int launch_local(const LaunchOptions& options, const std::function<void(Transport&)>& body) {
  if (options.workers < 1) throw ArgumentError("launch_local: need at least one worker");
  if (options.threads < 1) throw ArgumentError("launch_local: need at least one thread");
  if (options.workers == 1) {
    SequentialTransport transport;
    body(transport);
    return 0;
  }
  if (!options.worker_args) throw ArgumentError("launch_local: worker_args is required for M > 1");

  std::vector<Child> children;
  auto kill_all = [&] {
    for (auto& c : children)
      if (!c.reaped) ::kill(c.pid, SIGTERM);
    for (auto& c : children) reap(c, 0);
  };

  for (int r = 2; r <= options.workers; ++r) {
    std::vector<std::string> args{options.executable.string()};
    for (auto& a : options.worker_args(r)) args.push_back(std::move(a));
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ);
    if (rc != 0) {
      kill_all();
      throw TransportError("rank " + std::to_string(r) + ": cannot spawn " + args.front() + ": " +
                           std::strerror(rc));
    }
    children.push_back({r, pid});
  }

  SocketOptions socket_options;
  socket_options.rendezvous_timeout = options.rendezvous_timeout;
  socket_options.abort_probe = [&]() -> std::optional<std::string> {
    for (auto& c : children) {
      reap(c, WNOHANG);
      if (c.reaped)
        return "worker rank " + std::to_string(c.rank) + " ended early (" + describe_status(c.status) + ")";
    }
    return std::nullopt;
  };

  std::exception_ptr failure;
  try {
    SocketTransport transport(Topology::local(options.workers, 1, options.base_port), socket_options);
    try {
      body(transport);
    } catch (...) {
      transport.shutdown();
      throw;
    }
  } catch (...) {
    failure = std::current_exception();
  }

  if (failure) {
    kill_all();
    std::rethrow_exception(failure);
  }

  int result = 0;
  for (auto& c : children) {
    reap(c, 0);
    if (!(WIFEXITED(c.status) && WEXITSTATUS(c.status) == 0)) {
      std::cerr << "worker rank " << c.rank << " failed (" << describe_status(c.status) << ")\n";
      result = 1;
    }
  }
  return result;
}

}  // namespace roost
