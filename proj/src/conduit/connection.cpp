#include "iccs/conduit/connection.hpp"

#include <array>

#include <fmt/format.h>

#include "iccs/conduit/frame.hpp"
#include "iccs/logging.hpp"

namespace iccs::conduit {

std::shared_ptr<Connection> Connection::open(const std::string& host, std::uint16_t port,
                                             Millis timeout) {
  Socket socket = connect_tcp(host, port, timeout);
  return std::shared_ptr<Connection>(
      new Connection(std::move(socket), fmt::format("{}:{}", host, port)));
}

Connection::Connection(Socket socket, std::string endpoint)
    : socket_(std::move(socket)), endpoint_(std::move(endpoint)) {
  reader_ = std::thread([this] { reader_loop(); });
}

Connection::~Connection() {
  close();
  if (reader_.joinable()) reader_.join();
}

void Connection::close() {
  alive_ = false;
  socket_.shutdown();
}

void Connection::fail_all(const std::string& why) {
  alive_ = false;
  std::unordered_map<std::uint64_t, std::shared_ptr<Pending>> pending;
  {
    std::lock_guard lock(mu_);
    pending.swap(pending_);
  }
  for (auto& [id, p] : pending) {
    std::lock_guard lock(p->mu);
    p->failure = why;
    p->cv.notify_all();
  }
}

void Connection::reader_loop() {
  FrameDecoder decoder;
  std::array<std::uint8_t, 16384> buf{};
  std::string why = "connection closed by peer";
  try {
    for (;;) {
      std::size_t n = socket_.recv_some(buf);
      if (n == 0) break;
      decoder.feed(std::span(buf.data(), n));
      while (auto payload = decoder.next()) {
        Envelope reply = parse_envelope(*payload);
        if (reply.is_call()) continue;
        std::shared_ptr<Pending> p;
        {
          std::lock_guard lock(mu_);
          auto it = pending_.find(reply.id);
          if (it == pending_.end()) continue;  // caller already gave up
          p = it->second;
          pending_.erase(it);
        }
        std::lock_guard lock(p->mu);
        p->reply = std::move(reply);
        p->cv.notify_all();
      }
    }
  } catch (const std::exception& e) {
    why = e.what();
  }
  fail_all(fmt::format("{}: {}", endpoint_, why));
}

json Connection::call(const std::string& object, const std::string& method, json args,
                      Millis timeout) {
  if (!alive_) throw Error(ErrorCode::kCommFailure, fmt::format("{}: connection lost", endpoint_));

  auto pending = std::make_shared<Pending>();
  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    id = next_id_++;
    pending_.emplace(id, pending);
  }
  auto forget = [&] {
    std::lock_guard lock(mu_);
    pending_.erase(id);
  };

  auto frame = encode_frame(serialize(Envelope::call(id, object, method, std::move(args))));
  try {
    std::lock_guard lock(write_mu_);
    socket_.send_all(frame);
  } catch (const Error&) {
    forget();
    close();
    throw Error(ErrorCode::kCommFailure, fmt::format("{}: send failed", endpoint_));
  }

  std::unique_lock lock(pending->mu);
  bool done = pending->cv.wait_for(lock, timeout,
                                   [&] { return pending->reply || pending->failure; });
  if (!done) {
    lock.unlock();
    forget();
    throw Error(ErrorCode::kTimeout, fmt::format("{}.{} on {}: no reply within {} ms", object,
                                                 method, endpoint_, timeout.count()));
  }
  if (pending->failure) throw Error(ErrorCode::kCommFailure, *pending->failure);

  Envelope& reply = *pending->reply;
  if (reply.status == Envelope::Status::kError) {
    throw Error(reply.error->code, reply.error->message);
  }
  return std::move(reply.value);
}

}  // namespace iccs::conduit
