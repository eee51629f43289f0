#include "iccs/conduit/server.hpp"

#include <array>

#include "iccs/conduit/frame.hpp"
#include "iccs/logging.hpp"

namespace iccs::conduit {

struct Server::Peer {
  Socket socket;
  std::mutex write_mu;
  std::thread reader;
  std::atomic<bool> finished{false};

  void send(const Envelope& reply) {
    auto frame = encode_frame(serialize(reply));
    std::lock_guard lock(write_mu);
    if (!socket.valid()) return;
    try {
      socket.send_all(frame);
    } catch (const Error&) {
      socket.shutdown();
    }
  }
};

Server::Server(const std::string& bind_host, std::uint16_t port) : listener_(bind_host, port) {}

Server::~Server() { stop(); }

void Server::start(Handler handler) {
  handler_ = std::move(handler);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  std::list<std::shared_ptr<Peer>> peers;
  {
    std::lock_guard lock(mu_);
    peers.swap(peers_);
  }
  for (auto& p : peers) p->socket.shutdown();
  for (auto& p : peers) {
    if (p->reader.joinable()) p->reader.join();
  }
}

void Server::drop_connections() {
  std::lock_guard lock(mu_);
  for (auto& p : peers_) p->socket.shutdown();
}

std::size_t Server::connection_count() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& p : peers_) n += p->finished ? 0 : 1;
  return n;
}

void Server::reap_finished() {
  std::list<std::shared_ptr<Peer>> done;
  {
    std::lock_guard lock(mu_);
    for (auto it = peers_.begin(); it != peers_.end();) {
      if ((*it)->finished) {
        done.push_back(*it);
        it = peers_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& p : done) {
    if (p->reader.joinable()) p->reader.join();
  }
}

void Server::accept_loop() {
  while (running_) {
    auto socket = listener_.accept(Millis(50));
    reap_finished();
    if (!socket) continue;
    auto peer = std::make_shared<Peer>();
    peer->socket = std::move(*socket);
    std::lock_guard lock(mu_);
    peers_.push_back(peer);
    peer->reader = std::thread([this, peer] { serve(peer); });
  }
}

void Server::serve(const std::shared_ptr<Peer>& peer) {
  FrameDecoder decoder;
  std::array<std::uint8_t, 16384> buf{};
  std::weak_ptr<Peer> weak = peer;
  try {
    for (;;) {
      std::size_t n = peer->socket.recv_some(buf);
      if (n == 0) break;
      decoder.feed(std::span(buf.data(), n));
      while (auto payload = decoder.next()) {
        Envelope call;
        try {
          call = parse_envelope(*payload);
        } catch (const Error& e) {
          log::warning("conduit: dropping malformed frame: {}", e.what());
          continue;
        }
        if (!call.is_call()) continue;
        Responder respond = [this, weak](Envelope reply) {
          if (auto delay = reply_delay_ms_.load(); delay > 0) {
            std::this_thread::sleep_for(Millis(delay));
          }
          if (auto p = weak.lock()) p->send(reply);
        };
        handler_(std::move(call), std::move(respond));
      }
    }
  } catch (const std::exception& e) {
    log::debug("conduit: peer closed: {}", e.what());
  }
  peer->socket.shutdown();
  peer->finished = true;
}

}  // namespace iccs::conduit
