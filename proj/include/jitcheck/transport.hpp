#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "jitcheck/bytes.hpp"
#include "jitcheck/server.hpp"

namespace jitcheck {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bidirectional ordered byte stream as seen by a client.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(ByteView bytes) = 0;
  /// Some bytes, or nullopt once the timeout has elapsed with nothing to
  /// read (a loopback elapses instantly when nothing is queued). Throws
  /// TransportError once the peer has closed and nothing is left to read.
  virtual std::optional<Bytes> receive(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

/// In-memory loopback straight into a ServerSession. Synchronous: the
/// server's replies are queued by the time send() returns, which keeps
/// simulations single-threaded and deterministic.
class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(ServerCore& core) : session_(core) {}

  void send(ByteView bytes) override;
  std::optional<Bytes> receive(std::chrono::milliseconds timeout) override;
  void close() override;

  const ServerSession& session() const { return session_; }
  /// Every byte chunk the client sent, in order.
  const std::vector<Bytes>& sent() const { return sent_; }

 private:
  ServerSession session_;
  std::vector<Bytes> sent_;
  Bytes inbox_;
  bool closed_ = false;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = kDefaultPort;
};

/// "host:port" or "host" (default port). Throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& text);

class TcpTransport final : public Transport {
 public:
  /// Throws TransportError if the connection cannot be made.
  explicit TcpTransport(const Endpoint& endpoint);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send(ByteView bytes) override;
  std::optional<Bytes> receive(std::chrono::milliseconds timeout) override;
  void close() override;

 private:
  int fd_ = -1;
};

/// Accepts TCP connections and runs one ServerSession per connection on its
/// own thread; sessions share the ServerCore.
class TcpServer {
 public:
  TcpServer(ServerCore& core, const Endpoint& listen);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Bound port (useful when listening on port 0).
  std::uint16_t port() const { return port_; }
  /// Blocks until stop() is called.
  void run();
  void stop();

 private:
  void serve_connection(int fd);

  ServerCore& core_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex workers_mu_;
  std::condition_variable workers_done_;
  std::size_t active_workers_ = 0;
};

}  // namespace jitcheck
