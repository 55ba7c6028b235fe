#include "roost/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include "roost/tag.hpp"

namespace roost {

// ---- threaded backend -----------------------------------------------------

ThreadedHub::ThreadedHub(int n_workers) {
  if (n_workers < 1) throw ArgumentError("ThreadedHub: need at least one worker");
  for (int r = 0; r < n_workers; ++r) boxes_.push_back(std::make_unique<Mailbox>(n_workers));
}

void ThreadedHub::disconnect(int rank, const std::string& reason) {
  for (auto& box : boxes_) box->close_peer(rank, reason);
}

ThreadedTransport::ThreadedTransport(std::shared_ptr<ThreadedHub> hub, int rank)
    : hub_(std::move(hub)), rank_(rank) {
  check_rank(rank, "ThreadedTransport");
}

ThreadedTransport::~ThreadedTransport() = default;

RequestHandle ThreadedTransport::send(Envelope e) {
  check_rank(e.dest, "send");
  hub_->mailbox(e.dest).deliver(rank_, e.tag, std::move(e.payload));
  return {};
}

Bytes ThreadedTransport::receive(int from, std::uint64_t tag) {
  check_rank(from, "receive");
  return hub_->mailbox(rank_).take(from, tag, receive_timeout());
}

void run_threaded(int n_workers, const std::function<void(Transport&)>& body) {
  auto hub = std::make_shared<ThreadedHub>(n_workers);
  std::mutex mutex;
  std::exception_ptr first;
  std::vector<std::thread> threads;
  for (int r = 1; r <= n_workers; ++r) {
    threads.emplace_back([&, r] {
      try {
        ThreadedTransport t(hub, r);
        body(t);
      } catch (const std::exception& e) {
        {
          std::lock_guard lock(mutex);
          if (!first) first = std::current_exception();
        }
        hub->disconnect(r, e.what());
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

// ---- topology ---------------------------------------------------------------

Topology Topology::local(int n_workers, int self_rank, int base_port) {
  if (n_workers < 1) throw ArgumentError("Topology: need at least one worker");
  if (self_rank < 1 || self_rank > n_workers)
    throw ArgumentError("Topology: rank " + std::to_string(self_rank) + " outside 1.." +
                        std::to_string(n_workers));
  if (base_port < 1 || base_port + n_workers - 1 > 65535)
    throw ArgumentError("Topology: port range starting at " + std::to_string(base_port) +
                        " is invalid");
  Topology t{n_workers, self_rank, {}};
  for (int r = 0; r < n_workers; ++r) t.peers.push_back({"127.0.0.1", base_port + r});
  return t;
}

Topology Topology::from_hostfile(const std::filesystem::path& file, int n_workers, int self_rank) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read hostfile " + file.string());
  Topology t{n_workers, self_rank, {}};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.rfind(':');
    if (colon == std::string::npos)
      throw ArgumentError("hostfile " + file.string() + ": expected host:port, got \"" + line + "\"");
    t.peers.push_back({line.substr(0, colon), std::stoi(line.substr(colon + 1))});
  }
  if (static_cast<int>(t.peers.size()) != n_workers)
    throw ArgumentError("hostfile " + file.string() + " lists " + std::to_string(t.peers.size()) +
                        " peers for " + std::to_string(n_workers) + " workers");
  if (self_rank < 1 || self_rank > n_workers)
    throw ArgumentError("Topology: rank " + std::to_string(self_rank) + " outside 1.." +
                        std::to_string(n_workers));
  return t;
}

Topology Topology::from_environment(int n_workers, int self_rank) {
  if (const char* hostfile = std::getenv("ROOST_HOSTFILE"); hostfile && *hostfile)
    return from_hostfile(hostfile, n_workers, self_rank);
  return local(n_workers, self_rank, base_port_from_environment());
}

int base_port_from_environment() {
  const char* v = std::getenv("ROOST_BASE_PORT");
  if (!v || !*v) return kDefaultBasePort;
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw ArgumentError(std::string("ROOST_BASE_PORT is not a port number: ") + v);
  }
}

// ---- socket backend ---------------------------------------------------------

namespace {

struct FrameHeader {
  std::uint16_t magic;
  std::uint16_t sender;
  std::uint64_t tag;
  std::uint32_t length;
};

FrameHeader parse_header(const std::byte* p) {
  ByteReader r(std::span<const std::byte>(p, SocketTransport::kHeaderSize));
  FrameHeader h{};
  h.magic = r.get<std::uint16_t>();
  h.sender = r.get<std::uint16_t>();
  h.tag = r.get<std::uint64_t>();
  h.length = r.get<std::uint32_t>();
  return h;
}

std::string errno_text() { return std::strerror(errno); }

bool write_all(int fd, std::span<const std::byte> data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

/// Reads exactly `len` bytes; false on EOF or error.
bool read_all(int fd, std::byte* out, std::size_t len) {
  std::size_t off = 0;
  while (off < len) {
    const ssize_t n = ::recv(fd, out + off, len - off, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

/// Waits for `fd` to become readable; false on timeout.
bool wait_readable(int fd, std::chrono::milliseconds timeout) {
  pollfd p{fd, POLLIN, 0};
  while (true) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    return rc > 0;
  }
}

sockaddr_in resolve(const PeerAddress& peer) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(peer.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || !res)
    throw TransportError("cannot resolve host " + peer.host + ": " + ::gai_strerror(rc));
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(static_cast<std::uint16_t>(peer.port));
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Bytes SocketTransport::encode_frame(std::uint16_t sender, std::uint64_t tag,
                                    std::span<const std::byte> payload) {
  if (payload.size() > 0xffffffffULL) throw ArgumentError("send: payload exceeds 2^32 - 1 bytes");
  ByteWriter w;
  w.put(kMagic).put(sender).put(tag).put(static_cast<std::uint32_t>(payload.size()));
  w.put_bytes(payload);
  return w.take();
}

struct SocketTransport::Impl {
  Topology topology;
  SocketOptions options;
  Mailbox mailbox;
  int listen_fd = -1;
  std::vector<int> fds;  // by rank; -1 for self
  std::vector<std::unique_ptr<std::mutex>> write_locks;
  std::vector<std::thread> readers;
  std::atomic<bool> closed{false};

  explicit Impl(Topology t, SocketOptions o)
      : topology(std::move(t)), options(std::move(o)), mailbox(topology.n_workers) {
    fds.assign(static_cast<std::size_t>(topology.n_workers) + 1, -1);
    for (int r = 0; r <= topology.n_workers; ++r) write_locks.push_back(std::make_unique<std::mutex>());
  }

  ~Impl() {
    for (int fd : fds)
      if (fd >= 0) ::close(fd);
    if (listen_fd >= 0) ::close(listen_fd);
  }

  int self() const { return topology.self_rank; }

  void check_abort(const char* stage) {
    if (!options.abort_probe) return;
    if (auto why = options.abort_probe())
      throw TransportError(std::string("rendezvous aborted while ") + stage + ": " + *why);
  }

  void listen() {
    const PeerAddress& me = topology.peers.at(static_cast<std::size_t>(self() - 1));
    listen_fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd < 0) throw TransportError("socket: " + errno_text());
    int one = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<std::uint16_t>(me.port));
    if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw TransportError("rank " + std::to_string(self()) + ": cannot bind port " +
                           std::to_string(me.port) + ": " + errno_text());
    if (::listen(listen_fd, topology.n_workers + 4) != 0)
      throw TransportError("listen on port " + std::to_string(me.port) + ": " + errno_text());
  }

  void connect_to(int rank, Clock::time_point deadline) {
    const PeerAddress& peer = topology.peers.at(static_cast<std::size_t>(rank - 1));
    const sockaddr_in addr = resolve(peer);
    while (true) {
      const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
      if (fd < 0) throw TransportError("socket: " + errno_text());
      if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
        set_nodelay(fd);
        ByteWriter announce;
        announce.put(static_cast<std::uint16_t>(self()));
        const Bytes frame = encode_frame(static_cast<std::uint16_t>(self()), 0, announce.buffer());
        if (!write_all(fd, frame)) {
          ::close(fd);
          throw TransportError("announce to rank " + std::to_string(rank) + " failed: " + errno_text());
        }
        fds[static_cast<std::size_t>(rank)] = fd;
        return;
      }
      ::close(fd);
      check_abort("connecting");
      if (Clock::now() >= deadline)
        throw TransportError("rendezvous timed out: rank " + std::to_string(rank) + " at " +
                             peer.host + ":" + std::to_string(peer.port) + " unreachable");
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }

  void accept_higher(Clock::time_point deadline) {
    int missing = topology.n_workers - self();
    while (missing > 0) {
      check_abort("accepting peers");
      if (Clock::now() >= deadline)
        throw TransportError("rendezvous timed out: rank " + std::to_string(self()) + " still waits for " +
                             std::to_string(missing) + " peer(s)");
      if (!wait_readable(listen_fd, std::chrono::milliseconds(100))) continue;
      const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      set_nodelay(fd);
      std::byte header[kHeaderSize];
      std::byte body[2];
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (!wait_readable(fd, std::max(left, std::chrono::milliseconds(1))) ||
          !read_all(fd, header, kHeaderSize)) {
        ::close(fd);
        continue;
      }
      const FrameHeader h = parse_header(header);
      if (h.magic != kMagic || h.tag != 0 || h.length != 2 || !read_all(fd, body, 2)) {
        ::close(fd);
        throw ProtocolError("rank " + std::to_string(self()) + ": malformed rank-announce frame");
      }
      ByteReader r(std::span<const std::byte>(body, 2));
      const int rank = r.get<std::uint16_t>();
      if (rank != h.sender || rank <= self() || rank > topology.n_workers) {
        ::close(fd);
        throw ProtocolError("rank " + std::to_string(self()) + ": unexpected announce from rank " +
                            std::to_string(rank));
      }
      if (fds[static_cast<std::size_t>(rank)] >= 0) {
        ::close(fd);
        throw ProtocolError("duplicate rank announce: rank " + std::to_string(rank) +
                            " connected twice");
      }
      fds[static_cast<std::size_t>(rank)] = fd;
      --missing;
    }
  }

  void read_loop(int rank, int fd) {
    std::byte header[kHeaderSize];
    while (true) {
      if (!read_all(fd, header, kHeaderSize)) {
        mailbox.close_peer(rank, "connection closed");
        return;
      }
      const FrameHeader h = parse_header(header);
      if (h.magic != kMagic || h.sender != rank) {
        mailbox.fail("corrupt frame from rank " + std::to_string(rank));
        return;
      }
      Bytes payload(h.length);
      if (!read_all(fd, payload.data(), payload.size())) {
        mailbox.close_peer(rank, "connection closed mid-frame");
        return;
      }
      mailbox.deliver(rank, h.tag, std::move(payload));
    }
  }

  void start_readers() {
    for (int r = 1; r <= topology.n_workers; ++r)
      if (r != self()) readers.emplace_back([this, r] { read_loop(r, fds[static_cast<std::size_t>(r)]); });
  }

  /// Half-closes every link, then waits for peers to do the same so no
  /// in-flight frame is cut off.
  void close_gracefully(std::chrono::milliseconds grace) {
    for (int r = 1; r <= topology.n_workers; ++r)
      if (int fd = fds[static_cast<std::size_t>(r)]; fd >= 0) {
        std::lock_guard lock(*write_locks[static_cast<std::size_t>(r)]);
        ::shutdown(fd, SHUT_WR);
      }
    const auto deadline = Clock::now() + grace;
    for (int r = 1; r <= topology.n_workers; ++r) {
      const int fd = fds[static_cast<std::size_t>(r)];
      if (fd < 0) continue;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      // A reader blocked on a silent peer is released by a full shutdown.
      pollfd p{fd, POLLRDHUP, 0};
      if (left.count() <= 0 || ::poll(&p, 1, static_cast<int>(left.count())) <= 0)
        ::shutdown(fd, SHUT_RDWR);
    }
    join_readers();
  }

  void close_now() {
    for (int fd : fds)
      if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    join_readers();
  }

  void join_readers() {
    for (auto& t : readers)
      if (t.joinable()) t.join();
    readers.clear();
    closed = true;
  }
};

SocketTransport::SocketTransport(Topology topology, SocketOptions options)
    : impl_(std::make_unique<Impl>(std::move(topology), std::move(options))) {
  const Topology& t = impl_->topology;
  if (t.self_rank < 1 || t.self_rank > t.n_workers)
    throw ArgumentError("SocketTransport: rank " + std::to_string(t.self_rank) + " outside 1.." +
                        std::to_string(t.n_workers));
  if (static_cast<int>(t.peers.size()) != t.n_workers)
    throw ArgumentError("SocketTransport: peer table has " + std::to_string(t.peers.size()) +
                        " entries for " + std::to_string(t.n_workers) + " workers");
  if (t.n_workers >= static_cast<int>(kTagFieldLimit))
    throw ArgumentError("SocketTransport: too many workers");
  if (t.n_workers == 1) return;
  const auto deadline = Clock::now() + impl_->options.rendezvous_timeout;
  impl_->listen();
  for (int r = 1; r < t.self_rank; ++r) impl_->connect_to(r, deadline);
  impl_->accept_higher(deadline);
  ::close(impl_->listen_fd);
  impl_->listen_fd = -1;
  impl_->start_readers();
}

SocketTransport::~SocketTransport() {
  if (!impl_->closed) impl_->close_gracefully(receive_timeout());
}

int SocketTransport::rank() const { return impl_->topology.self_rank; }
int SocketTransport::size() const { return impl_->topology.n_workers; }

RequestHandle SocketTransport::send(Envelope e) {
  check_rank(e.dest, "send");
  if (e.dest == rank()) {
    impl_->mailbox.deliver(rank(), e.tag, std::move(e.payload));
    return {};
  }
  const Bytes frame = encode_frame(static_cast<std::uint16_t>(rank()), e.tag, e.payload);
  const auto d = static_cast<std::size_t>(e.dest);
  std::lock_guard lock(*impl_->write_locks[d]);
  if (impl_->closed || impl_->fds[d] < 0 || !write_all(impl_->fds[d], frame))
    throw TransportError("send to rank " + std::to_string(e.dest) + " failed: peer is closed");
  return {};
}

Bytes SocketTransport::receive(int from, std::uint64_t tag) {
  check_rank(from, "receive");
  return impl_->mailbox.take(from, tag, receive_timeout());
}

void SocketTransport::shutdown() {
  if (!impl_->closed) impl_->close_now();
}

}  // namespace roost
