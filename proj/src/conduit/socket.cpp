#include "iccs/conduit/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>

#include <fmt/format.h>

#include "iccs/error.hpp"

namespace iccs::conduit {

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() {
  int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kCommFailure, fmt::format("send failed: {}", std::strerror(errno)));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t Socket::recv_some(std::span<std::uint8_t> buffer) {
  for (;;) {
    ssize_t n = ::recv(fd_, buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    throw Error(ErrorCode::kCommFailure, fmt::format("recv failed: {}", std::strerror(errno)));
  }
}

namespace {

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Socket connect_tcp(const std::string& host, std::uint16_t port, Millis timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string port_text = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::kConnectFailed,
                fmt::format("cannot resolve {}: {}", host, ::gai_strerror(rc)));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);

  Socket sock(::socket(res->ai_family, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock.valid()) {
    throw Error(ErrorCode::kConnectFailed, fmt::format("socket: {}", std::strerror(errno)));
  }
  int flags = ::fcntl(sock.fd(), F_GETFL, 0);
  ::fcntl(sock.fd(), F_SETFL, flags | O_NONBLOCK);

  int rc = ::connect(sock.fd(), res->ai_addr, res->ai_addrlen);
  if (rc < 0 && errno != EINPROGRESS) {
    throw Error(ErrorCode::kConnectFailed,
                fmt::format("connect {}:{}: {}", host, port, std::strerror(errno)));
  }
  if (rc < 0) {
    pollfd pfd{sock.fd(), POLLOUT, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready == 0) {
      throw Error(ErrorCode::kConnectFailed, fmt::format("connect {}:{}: timed out", host, port));
    }
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (ready < 0 || err != 0) {
      throw Error(ErrorCode::kConnectFailed,
                  fmt::format("connect {}:{}: {}", host, port, std::strerror(err ? err : errno)));
    }
  }
  ::fcntl(sock.fd(), F_SETFL, flags);
  set_nodelay(sock.fd());
  return sock;
}

Listener::Listener(const std::string& host, std::uint16_t port) {
  socket_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!socket_.valid()) {
    throw Error(ErrorCode::kConnectFailed, fmt::format("socket: {}", std::strerror(errno)));
  }
  int one = 1;
  ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
  } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    // Hostnames bind to every interface; the advertised name is the caller's business.
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
  }
  if (::bind(socket_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    throw Error(ErrorCode::kConnectFailed,
                fmt::format("bind {}:{}: {}", host, port, std::strerror(errno)));
  }
  if (::listen(socket_.fd(), 128) < 0) {
    throw Error(ErrorCode::kConnectFailed, fmt::format("listen: {}", std::strerror(errno)));
  }
  socklen_t len = sizeof addr;
  ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

std::optional<Socket> Listener::accept(Millis timeout) {
  if (!socket_.valid()) return std::nullopt;
  pollfd pfd{socket_.fd(), POLLIN, 0};
  int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (ready <= 0 || !(pfd.revents & POLLIN)) return std::nullopt;
  int fd = ::accept4(socket_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  set_nodelay(fd);
  return Socket(fd);
}

}  // namespace iccs::conduit
