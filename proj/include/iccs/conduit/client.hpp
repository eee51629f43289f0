#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "iccs/conduit/connection.hpp"
#include "iccs/conduit/object_ref.hpp"

namespace iccs::conduit {

/// How a client reacts to the three failure modes: a target that is not up
/// yet, a formerly good connection that died, and a call that never returns.
struct ConnectionPolicy {
  bool wait_for_presence = false;
  bool ping_before_invoke = false;
  bool refresh_on_failure = false;
  int max_attempts = 1;
  Millis retry_backoff{100};
  Millis call_timeout{2000};

  void validate() const;  // throws BAD_ARGS
  /// Upper bound on how long one invoke may block.
  Millis worst_case() const;

  static ConnectionPolicy from_json(const json& j);  // missing fields keep defaults
  json to_json() const;
};

/// Name lookup used for presence waits and reference refresh.
class Resolver {
 public:
  virtual ~Resolver() = default;
  virtual ObjectRef resolve(const std::string& name) = 0;                // NO_SUCH_OBJECT
  virtual ObjectRef wait_for(const std::string& name, Millis timeout) = 0;  // TIMEOUT
};

/// Outbound call counters, shared by every client a component owns.
class CallStats {
 public:
  void record(const std::string& method);
  std::uint64_t total() const { return total_.load(); }
  std::uint64_t count(const std::string& method) const;
  std::map<std::string, std::uint64_t> snapshot() const;

 private:
  std::atomic<std::uint64_t> total_{0};
  mutable std::mutex mu_;
  std::map<std::string, std::uint64_t> by_method_;
};

struct ClientOptions {
  ConnectionPolicy policy;
  std::shared_ptr<Resolver> resolver;
  std::shared_ptr<CallStats> stats;
};

/// Handle on one distributed object. Safe to share between threads; calls
/// from several threads share one connection.
class Client {
 public:
  Client(ObjectRef target, ClientOptions options = {});
  /// Resolved through the options' resolver on first use.
  Client(std::string name, ClientOptions options);

  json invoke(const std::string& method, json args = json::object());
  bool ping();

  const std::string& name() const { return name_; }
  std::optional<ObjectRef> ref() const;
  const ConnectionPolicy& policy() const { return options_.policy; }
  /// Connection cycles (resolve and/or connect) performed by the last invoke.
  int last_attempts() const { return last_attempts_.load(); }

 private:
  using Clock = std::chrono::steady_clock;

  std::shared_ptr<Connection> acquire(Clock::time_point deadline, ObjectRef& target);
  void drop(const std::shared_ptr<Connection>& conn);
  void forget_ref();

  std::string name_;
  ClientOptions options_;
  mutable std::mutex mu_;
  std::optional<ObjectRef> ref_;
  std::shared_ptr<Connection> conn_;
  bool had_success_ = false;
  std::atomic<int> last_attempts_{0};
};

/// One-shot invoke through a fresh handle.
json invoke(const ObjectRef& target, const std::string& method, json args,
            const ConnectionPolicy& policy, std::shared_ptr<Resolver> resolver = {});

/// True iff a `__ping` completes within `timeout`; never throws.
bool ping(const ObjectRef& target, Millis timeout);

/// The reserved liveness method answered by every process dispatcher.
inline constexpr const char* kPingMethod = "__ping";

}  // namespace iccs::conduit
