#pragma once

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include "iccs/conduit/envelope.hpp"
#include "iccs/conduit/socket.hpp"

namespace iccs::conduit {

/// Accepts framed calls and hands each one to a handler together with a
/// responder. Responders may be invoked from any thread, at most once.
class Server {
 public:
  using Responder = std::function<void(Envelope reply)>;
  using Handler = std::function<void(Envelope call, Responder respond)>;

  /// Binds immediately so the port is known before start().
  Server(const std::string& bind_host, std::uint16_t port);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return listener_.port(); }

  void start(Handler handler);
  void stop();

  /// Fault injection: closes every accepted connection, keeps listening.
  void drop_connections();
  /// Fault injection: delays every reply.
  void set_reply_delay(Millis delay) { reply_delay_ms_ = delay.count(); }

  std::size_t connection_count() const;

 private:
  struct Peer;
  void accept_loop();
  void serve(const std::shared_ptr<Peer>& peer);
  void reap_finished();

  Listener listener_;
  Handler handler_;
  std::atomic<bool> running_{false};
  std::atomic<long long> reply_delay_ms_{0};
  std::thread acceptor_;
  mutable std::mutex mu_;
  std::list<std::shared_ptr<Peer>> peers_;
};

}  // namespace iccs::conduit
