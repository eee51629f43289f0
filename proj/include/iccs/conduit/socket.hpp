#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "iccs/value.hpp"

namespace iccs::conduit {

/// Owning wrapper around a TCP socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  /// Unblocks any thread sitting in recv() on this socket.
  void shutdown();

  /// Writes every byte or throws COMM_FAILURE.
  void send_all(std::span<const std::uint8_t> bytes);
  /// Returns 0 on orderly close; throws COMM_FAILURE on error.
  std::size_t recv_some(std::span<std::uint8_t> buffer);

 private:
  int fd_ = -1;
};

/// Connects with a bounded wait. Throws CONNECT_FAILED.
Socket connect_tcp(const std::string& host, std::uint16_t port, Millis timeout);

class Listener {
 public:
  /// Binds and listens immediately; port 0 picks an ephemeral port.
  Listener(const std::string& host, std::uint16_t port);

  std::uint16_t port() const { return port_; }
  /// Waits up to `timeout` for a connection.
  std::optional<Socket> accept(Millis timeout);
  void close() { socket_.close(); }

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

}  // namespace iccs::conduit
