#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include "iccs/conduit/envelope.hpp"
#include "iccs/conduit/socket.hpp"

namespace iccs::conduit {

/// Client side of one TCP connection. Any number of threads may have calls
/// outstanding at once; a reader thread matches replies to callers by id.
class Connection {
 public:
  static std::shared_ptr<Connection> open(const std::string& host, std::uint16_t port,
                                          Millis timeout);
  ~Connection();

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Returns the reply value or throws: server errors are relayed with their
  /// own code, a lost connection is COMM_FAILURE, no reply in time is TIMEOUT.
  json call(const std::string& object, const std::string& method, json args, Millis timeout);

  bool alive() const { return alive_.load(); }
  void close();
  const std::string& endpoint() const { return endpoint_; }

 private:
  struct Pending {
    std::mutex mu;
    std::condition_variable cv;
    std::optional<Envelope> reply;
    std::optional<std::string> failure;
  };

  Connection(Socket socket, std::string endpoint);
  void reader_loop();
  void fail_all(const std::string& why);

  Socket socket_;
  std::string endpoint_;
  std::atomic<bool> alive_{true};
  std::mutex write_mu_;
  std::mutex mu_;
  std::uint64_t next_id_ = 1;
  std::unordered_map<std::uint64_t, std::shared_ptr<Pending>> pending_;
  std::thread reader_;
};

}  // namespace iccs::conduit
