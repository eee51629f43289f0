#include "iccs/conduit/client.hpp"

#include <algorithm>
#include <thread>

#include <fmt/format.h>

#include "iccs/logging.hpp"

namespace iccs::conduit {

void ConnectionPolicy::validate() const {
  if (max_attempts < 1) throw Error(ErrorCode::kBadArgs, "max_attempts must be >= 1");
  if (retry_backoff.count() < 0) throw Error(ErrorCode::kBadArgs, "retry_backoff must be >= 0");
  if (call_timeout.count() <= 0) throw Error(ErrorCode::kBadArgs, "call_timeout must be > 0");
}

Millis ConnectionPolicy::worst_case() const {
  return call_timeout + max_attempts * (retry_backoff + call_timeout);
}

ConnectionPolicy ConnectionPolicy::from_json(const json& j) {
  ConnectionPolicy p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw Error(ErrorCode::kBadArgs, "policy must be an object");
  try {
    p.wait_for_presence = j.value("wait_for_presence", p.wait_for_presence);
    p.ping_before_invoke = j.value("ping_before_invoke", p.ping_before_invoke);
    p.refresh_on_failure = j.value("refresh_on_failure", p.refresh_on_failure);
    p.max_attempts = j.value("max_attempts", p.max_attempts);
    p.retry_backoff = Millis(j.value("retry_backoff_ms", p.retry_backoff.count()));
    p.call_timeout = Millis(j.value("call_timeout_ms", p.call_timeout.count()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadArgs, fmt::format("bad policy: {}", e.what()));
  }
  p.validate();
  return p;
}

json ConnectionPolicy::to_json() const {
  return {{"wait_for_presence", wait_for_presence},
          {"ping_before_invoke", ping_before_invoke},
          {"refresh_on_failure", refresh_on_failure},
          {"max_attempts", max_attempts},
          {"retry_backoff_ms", retry_backoff.count()},
          {"call_timeout_ms", call_timeout.count()}};
}

void CallStats::record(const std::string& method) {
  ++total_;
  std::lock_guard lock(mu_);
  ++by_method_[method];
}

std::uint64_t CallStats::count(const std::string& method) const {
  std::lock_guard lock(mu_);
  auto it = by_method_.find(method);
  return it == by_method_.end() ? 0 : it->second;
}

std::map<std::string, std::uint64_t> CallStats::snapshot() const {
  std::lock_guard lock(mu_);
  return by_method_;
}

Client::Client(ObjectRef target, ClientOptions options)
    : name_(target.object), options_(std::move(options)), ref_(std::move(target)) {
  options_.policy.validate();
}

Client::Client(std::string name, ClientOptions options)
    : name_(std::move(name)), options_(std::move(options)) {
  options_.policy.validate();
  if (!options_.resolver) {
    throw Error(ErrorCode::kBadArgs, fmt::format("client for '{}' needs a resolver", name_));
  }
}

std::optional<ObjectRef> Client::ref() const {
  std::lock_guard lock(mu_);
  return ref_;
}

namespace {

using Clock = std::chrono::steady_clock;

Millis remaining(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
  return std::max(left, Millis(1));
}

// Failures that a fresh resolve/connect cycle may cure.
struct Recoverable {
  ErrorCode code;
  std::string message;
  bool lost_connection;  // a previously working connection went away
};

}  // namespace

void Client::drop(const std::shared_ptr<Connection>& conn) {
  std::lock_guard lock(mu_);
  if (conn_ == conn) conn_.reset();
}

void Client::forget_ref() {
  std::lock_guard lock(mu_);
  if (options_.resolver) ref_.reset();
  conn_.reset();
}

std::shared_ptr<Connection> Client::acquire(Clock::time_point deadline, ObjectRef& target) {
  std::optional<ObjectRef> ref;
  std::shared_ptr<Connection> conn;
  {
    std::lock_guard lock(mu_);
    ref = ref_;
    conn = conn_;
  }
  if (conn && conn->alive() && ref) {
    target = *ref;
    return conn;
  }
  if (conn) {
    // The connection we had is gone; surface that rather than silently reconnecting.
    drop(conn);
    throw Recoverable{ErrorCode::kCommFailure,
                      fmt::format("{}: connection to {} lost", name_, conn->endpoint()), true};
  }
  if (!ref) {
    try {
      const auto& p = options_.policy;
      ref = p.wait_for_presence
                ? options_.resolver->wait_for(name_, std::min(p.retry_backoff + p.call_timeout,
                                                              remaining(deadline)))
                : options_.resolver->resolve(name_);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNoSuchObject || e.code() == ErrorCode::kTimeout) {
        throw Recoverable{e.code(), fmt::format("{}: not registered", name_), false};
      }
      throw Recoverable{ErrorCode::kConnectFailed,
                        fmt::format("{}: name service unreachable: {}", name_, e.what()), false};
    }
    std::lock_guard lock(mu_);
    ref_ = ref;
  }
  try {
    conn = Connection::open(ref->host, ref->port,
                            std::min(options_.policy.call_timeout, remaining(deadline)));
  } catch (const Error& e) {
    throw Recoverable{ErrorCode::kConnectFailed, e.what(), false};
  }
  std::lock_guard lock(mu_);
  conn_ = conn;
  had_success_ = true;
  target = *ref;
  return conn;
}

json Client::invoke(const std::string& method, json args) {
  const auto& policy = options_.policy;
  const auto deadline = Clock::now() + policy.worst_case();
  std::optional<Recoverable> last;

  int attempt = 0;
  while (attempt < policy.max_attempts) {
    ++attempt;
    last_attempts_ = attempt;
    if (attempt > 1 && policy.retry_backoff.count() > 0) {
      std::this_thread::sleep_for(std::min(policy.retry_backoff, remaining(deadline)));
    }

    std::shared_ptr<Connection> conn;
    ObjectRef target;
    try {
      conn = acquire(deadline, target);
      if (policy.ping_before_invoke) {
        try {
          conn->call(target.object, kPingMethod, nullptr,
                     std::min(policy.call_timeout, remaining(deadline)));
        } catch (const Error& e) {
          drop(conn);
          conn->close();
          throw Recoverable{ErrorCode::kCommFailure, fmt::format("ping failed: {}", e.what()),
                            true};
        }
      }
    } catch (Recoverable& r) {
      bool before_success;
      {
        std::lock_guard lock(mu_);
        before_success = !had_success_;
      }
      bool retry = policy.refresh_on_failure || (before_success && policy.wait_for_presence);
      log::warning("conduit: {}.{} attempt {}/{} failed: {}{}", name_, method, attempt,
                   policy.max_attempts, r.message,
                   retry && attempt < policy.max_attempts ? "; retrying" : "");
      last = std::move(r);
      if (!retry) break;
      if (policy.refresh_on_failure) forget_ref();
      continue;
    }

    if (options_.stats) options_.stats->record(method);
    try {
      return conn->call(target.object, method, std::move(args),
                        std::min(policy.call_timeout, remaining(deadline)));
    } catch (const Error& e) {
      // Mid-invocation failures are never retried: the call may have executed.
      if (e.code() == ErrorCode::kCommFailure || e.code() == ErrorCode::kTimeout) {
        drop(conn);
        if (e.code() == ErrorCode::kTimeout) conn->close();
      }
      throw;
    }
  }

  bool connected_before;
  {
    std::lock_guard lock(mu_);
    connected_before = had_success_;
  }
  if (!last) throw Error(ErrorCode::kConnectFailed, fmt::format("{}: no attempt made", name_));
  if (last->code == ErrorCode::kNoSuchObject && !policy.wait_for_presence &&
      !policy.refresh_on_failure) {
    throw Error(ErrorCode::kNoSuchObject, last->message);
  }
  if (connected_before || last->lost_connection) {
    throw Error(ErrorCode::kCommFailure, last->message);
  }
  throw Error(ErrorCode::kConnectFailed, last->message);
}

bool Client::ping() {
  try {
    ObjectRef target;
    auto deadline = Clock::now() + options_.policy.call_timeout;
    auto conn = acquire(deadline, target);
    conn->call(target.object, kPingMethod, nullptr, remaining(deadline));
    return true;
  } catch (...) {
    return false;
  }
}

json invoke(const ObjectRef& target, const std::string& method, json args,
            const ConnectionPolicy& policy, std::shared_ptr<Resolver> resolver) {
  Client client(target, ClientOptions{policy, std::move(resolver), nullptr});
  return client.invoke(method, std::move(args));
}

bool ping(const ObjectRef& target, Millis timeout) {
  try {
    auto deadline = Clock::now() + timeout;
    auto conn = Connection::open(target.host, target.port, timeout);
    conn->call(target.object, kPingMethod, nullptr, remaining(deadline));
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace iccs::conduit
