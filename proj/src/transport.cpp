#include "jitcheck/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace jitcheck {

// --- loopback ---------------------------------------------------------------

void LoopbackTransport::send(ByteView bytes) {
  if (closed_) throw TransportError("transport closed");
  sent_.emplace_back(bytes.begin(), bytes.end());
  for (auto& reply : session_.on_bytes(bytes)) inbox_.insert(inbox_.end(), reply.begin(), reply.end());
}

std::optional<Bytes> LoopbackTransport::receive(std::chrono::milliseconds) {
  if (!inbox_.empty()) return std::exchange(inbox_, {});
  if (closed_ || session_.closed()) throw TransportError("connection closed by server");
  return std::nullopt;
}

void LoopbackTransport::close() {
  if (closed_) return;
  closed_ = true;
  session_.on_end_of_stream();
}

// --- tcp --------------------------------------------------------------------

Endpoint parse_endpoint(const std::string& text) {
  Endpoint ep;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    ep.host = text;
  } else {
    ep.host = text.substr(0, colon);
    const auto port = text.substr(colon + 1);
    std::size_t used = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(port, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad port in address: " + text);
    }
    if (used != port.size() || value > 65535) throw std::invalid_argument("bad port in address: " + text);
    ep.port = static_cast<std::uint16_t>(value);
  }
  if (ep.host.empty()) throw std::invalid_argument("missing host in address: " + text);
  return ep;
}

namespace {

std::string errno_text() { return std::strerror(errno); }

void send_all(int fd, ByteView bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const auto n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("send failed: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

/// nullopt on timeout, empty Bytes on orderly shutdown.
std::optional<Bytes> recv_some(int fd, int timeout_ms) {
  pollfd pfd{fd, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready < 0) {
    if (errno == EINTR) return std::nullopt;
    throw TransportError("poll failed: " + errno_text());
  }
  if (ready == 0) return std::nullopt;
  Bytes buf(64 * 1024);
  const auto n = ::recv(fd, buf.data(), buf.size(), 0);
  if (n < 0) {
    if (errno == EINTR || errno == EAGAIN) return std::nullopt;
    throw TransportError("recv failed: " + errno_text());
  }
  buf.resize(static_cast<std::size_t>(n));
  return buf;
}

}  // namespace

TcpTransport::TcpTransport(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(endpoint.port);
  if (int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw TransportError("cannot resolve " + endpoint.host + ": " + ::gai_strerror(rc));
  std::string last_error = "no addresses";
  for (auto* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    last_error = errno_text();
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw TransportError("cannot connect to " + endpoint.host + ":" + port + ": " + last_error);
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::send(ByteView bytes) {
  if (fd_ < 0) throw TransportError("transport closed");
  send_all(fd_, bytes);
}

std::optional<Bytes> TcpTransport::receive(std::chrono::milliseconds timeout) {
  if (fd_ < 0) throw TransportError("transport closed");
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    auto got = recv_some(fd_, static_cast<int>(std::max<std::int64_t>(0, left.count())));
    if (got && got->empty()) throw TransportError("connection closed by server");
    // recv_some can return early on EINTR; keep waiting until the deadline.
    if (got || clock::now() >= deadline) return got;
  }
}

void TcpTransport::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpServer::TcpServer(ServerCore& core, const Endpoint& listen) : core_(core) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const auto port = std::to_string(listen.port);
  if (int rc = ::getaddrinfo(listen.host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw TransportError("cannot resolve listen address " + listen.host + ": " + ::gai_strerror(rc));
  std::string last_error = "no addresses";
  for (auto* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_error = errno_text();
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) throw TransportError("cannot listen on " + listen.host + ":" + port + ": " + last_error);

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

TcpServer::~TcpServer() {
  stop();
  {
    std::unique_lock lock(workers_mu_);
    workers_done_.wait(lock, [this] { return active_workers_ == 0; });
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::stop() { stopping_ = true; }

void TcpServer::run() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 100);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    {
      std::lock_guard lock(workers_mu_);
      ++active_workers_;
    }
    std::thread([this, fd] {
      serve_connection(fd);
      std::lock_guard lock(workers_mu_);
      if (--active_workers_ == 0) workers_done_.notify_all();
    }).detach();
  }
  // Stop accepting; in-flight sessions finish in their own threads.
  ::close(listen_fd_);
  listen_fd_ = -1;
}

void TcpServer::serve_connection(int fd) {
  ServerSession session(core_);
  try {
    while (!stopping_ && !session.closed()) {
      auto got = recv_some(fd, 100);
      if (!got) continue;
      if (got->empty()) {
        session.on_end_of_stream();
        break;
      }
      for (const auto& reply : session.on_bytes(*got)) send_all(fd, reply);
    }
  } catch (const TransportError&) {
    // Peer vanished; nothing to tell it.
  }
  ::close(fd);
}

}  // namespace jitcheck
