#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roost/bytes.hpp"
#include "roost/errors.hpp"

namespace roost {

using Clock = std::chrono::steady_clock;

inline constexpr std::chrono::milliseconds kDefaultReceiveTimeout{60'000};

struct Envelope {
  int dest = 0;
  std::uint64_t tag = 0;
  Bytes payload;
};

/// Completion token for a send. Shared with the backend that flushes it.
class RequestHandle {
 public:
  struct State {
    std::mutex mutex;
    std::condition_variable cv;
    bool done = false;
    std::string error;
  };

  RequestHandle() : state_(completed_state()) {}
  explicit RequestHandle(std::shared_ptr<State> state) : state_(std::move(state)) {}

  /// Blocks until flushed; throws TransportError if the flush failed.
  void wait() const {
    std::unique_lock lock(state_->mutex);
    state_->cv.wait(lock, [&] { return state_->done; });
    if (!state_->error.empty()) throw TransportError(state_->error);
  }

  static void complete(State& s, std::string error = {}) {
    {
      std::lock_guard lock(s.mutex);
      s.done = true;
      s.error = std::move(error);
    }
    s.cv.notify_all();
  }

 private:
  static std::shared_ptr<State> completed_state() {
    auto s = std::make_shared<State>();
    s->done = true;
    return s;
  }

  std::shared_ptr<State> state_;
};

/// Tag-matched point-to-point messaging between worker ranks 1..size().
///
/// Delivery contract: a message is identified by (sender, dest, tag) and is
/// delivered exactly once; receive() matches on (sender, tag) only, never on
/// arrival order. send() and receive() may be called from several threads.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual int rank() const = 0;
  virtual int size() const = 0;

  virtual RequestHandle send(Envelope envelope) = 0;
  virtual Bytes receive(int from, std::uint64_t tag) = 0;

  RequestHandle send(int dest, std::uint64_t tag, Bytes payload) {
    return send(Envelope{dest, tag, std::move(payload)});
  }

  void waitall(std::span<const RequestHandle> handles) {
    for (const auto& h : handles) h.wait();
  }

  void set_receive_timeout(std::chrono::milliseconds t) { receive_timeout_ = t; }
  std::chrono::milliseconds receive_timeout() const { return receive_timeout_; }

 protected:
  void check_rank(int r, const char* what) const {
    if (r < 1 || r > size())
      throw ArgumentError(std::string(what) + ": unknown rank " + std::to_string(r) +
                          " (topology has " + std::to_string(size()) + " workers)");
  }

 private:
  std::chrono::milliseconds receive_timeout_ = kDefaultReceiveTimeout;
};

/// Incoming messages of one rank, keyed by (sender, tag).
class Mailbox {
 public:
  explicit Mailbox(int n_senders) : closed_(static_cast<std::size_t>(n_senders) + 1) {}

  void deliver(int from, std::uint64_t tag, Bytes payload) {
    {
      std::lock_guard lock(mutex_);
      auto [it, inserted] = box_.try_emplace({from, tag}, std::move(payload));
      if (!inserted && fatal_.empty())
        fatal_ = "duplicate message from rank " + std::to_string(from) + " with tag " +
                 std::to_string(tag);
    }
    cv_.notify_all();
  }

  void close_peer(int from, const std::string& reason) {
    {
      std::lock_guard lock(mutex_);
      if (!closed_.at(static_cast<std::size_t>(from)))
        closed_[static_cast<std::size_t>(from)] = reason;
    }
    cv_.notify_all();
  }

  void fail(const std::string& reason) {
    {
      std::lock_guard lock(mutex_);
      if (fatal_.empty()) fatal_ = reason;
    }
    cv_.notify_all();
  }

  Bytes take(int from, std::uint64_t tag, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    const auto deadline = Clock::now() + timeout;
    while (true) {
      if (!fatal_.empty()) throw ProtocolError(fatal_);
      if (auto it = box_.find({from, tag}); it != box_.end()) {
        Bytes out = std::move(it->second);
        box_.erase(it);
        return out;
      }
      if (const auto& why = closed_.at(static_cast<std::size_t>(from)))
        throw TransportError("rank " + std::to_string(from) + " is gone (" + *why +
                             ") while waiting for tag " + std::to_string(tag));
      if (Clock::now() >= deadline)
        throw DeadlockError("no message from rank " + std::to_string(from) + " with tag " +
                            std::to_string(tag) + " after " + std::to_string(timeout.count()) +
                            " ms");
      cv_.wait_until(lock, deadline);
    }
  }

  std::size_t pending() const {
    std::lock_guard lock(mutex_);
    return box_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::pair<int, std::uint64_t>, Bytes> box_;
  std::vector<std::optional<std::string>> closed_;
  std::string fatal_;
};

/// Single worker, no threads, no sockets: every message is a loopback.
class SequentialTransport final : public Transport {
 public:
  SequentialTransport() : box_(1) {}

  int rank() const override { return 1; }
  int size() const override { return 1; }

  using Transport::send;
  RequestHandle send(Envelope e) override {
    check_rank(e.dest, "send");
    box_.deliver(1, e.tag, std::move(e.payload));
    return {};
  }

  Bytes receive(int from, std::uint64_t tag) override {
    check_rank(from, "receive");
    return box_.take(from, tag, receive_timeout());
  }

 private:
  Mailbox box_;
};

/// Shared mailboxes for M in-process workers, one thread each.
class ThreadedHub {
 public:
  explicit ThreadedHub(int n_workers);

  int size() const { return static_cast<int>(boxes_.size()); }
  Mailbox& mailbox(int rank) { return *boxes_.at(static_cast<std::size_t>(rank - 1)); }

  /// Marks `rank` as gone; pending and future receives from it fail.
  void disconnect(int rank, const std::string& reason);

 private:
  std::vector<std::unique_ptr<Mailbox>> boxes_;
};

class ThreadedTransport final : public Transport {
 public:
  ThreadedTransport(std::shared_ptr<ThreadedHub> hub, int rank);
  ~ThreadedTransport() override;

  int rank() const override { return rank_; }
  int size() const override { return hub_->size(); }

  using Transport::send;
  RequestHandle send(Envelope e) override;
  Bytes receive(int from, std::uint64_t tag) override;

 private:
  std::shared_ptr<ThreadedHub> hub_;
  int rank_;
};

/// Runs `body` on M in-process workers (one std::thread each) over a shared
/// hub. A failing worker is disconnected so its peers fail fast; the first
/// failure observed is rethrown.
void run_threaded(int n_workers, const std::function<void(Transport&)>& body);

struct PeerAddress {
  std::string host;
  int port = 0;
};

struct Topology {
  int n_workers = 1;
  int self_rank = 1;
  std::vector<PeerAddress> peers;  // indexed by rank - 1

  /// Loopback topology: rank r listens on base_port + r - 1.
  static Topology local(int n_workers, int self_rank, int base_port);
  /// Reads ROOST_HOSTFILE (host:port per line, rank order) when set,
  /// otherwise a loopback topology on ROOST_BASE_PORT (default 47000).
  static Topology from_environment(int n_workers, int self_rank);
  static Topology from_hostfile(const std::filesystem::path& file, int n_workers, int self_rank);
};

inline constexpr int kDefaultBasePort = 47000;
int base_port_from_environment();

struct SocketOptions {
  std::chrono::milliseconds rendezvous_timeout{30'000};
  /// Polled while waiting for peers; returning a message aborts rendezvous.
  std::function<std::optional<std::string>()> abort_probe;
};

/// Full TCP mesh over the peers of a Topology.
///
/// Wire frame, little-endian: magic u16 0x5047 | sender u16 | tag u64 |
/// length u32 | payload. After connecting, each side sends a rank-announce
/// frame (tag 0, payload = rank u16).
class SocketTransport final : public Transport {
 public:
  static constexpr std::uint16_t kMagic = 0x5047;
  static constexpr std::size_t kHeaderSize = 16;

  SocketTransport(Topology topology, SocketOptions options = {});
  ~SocketTransport() override;

  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  int rank() const override;
  int size() const override;

  using Transport::send;
  RequestHandle send(Envelope e) override;
  Bytes receive(int from, std::uint64_t tag) override;

  /// Closes every connection; peers observe a transport error.
  void shutdown();

  static Bytes encode_frame(std::uint16_t sender, std::uint64_t tag,
                            std::span<const std::byte> payload);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct LaunchOptions {
  int workers = 1;
  int threads = 1;
  int base_port = kDefaultBasePort;
  std::filesystem::path executable = "/proc/self/exe";
  /// argv (without argv[0]) for the child that plays `rank` (2..workers).
  std::function<std::vector<std::string>(int rank)> worker_args;
  std::chrono::milliseconds rendezvous_timeout{30'000};
};

/// Runs `body` as rank 1. With workers == 1 this is a pure in-process call on a
/// SequentialTransport. Otherwise spawns workers - 1 child processes, connects
/// them over loopback sockets and returns the aggregated exit status
/// (0 when every rank succeeded).
int launch_local(const LaunchOptions& options, const std::function<void(Transport&)>& body);

}  // namespace roost
