#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iccs/conduit/client.hpp"
#include "iccs/kernel/boot.hpp"
#include "iccs/kernel/context.hpp"
#include "iccs/kernel/serial_worker.hpp"
#include "iccs/registry/config.hpp"
#include "iccs/supervisory/director.hpp"

namespace iccs::gateway {

class HttpServer;

/// Outbound messages a session may have queued before it is disconnected.
inline constexpr std::size_t kDefaultOutboxLimit = 1024;

/// Policy for operator commands proxied from consoles.
conduit::ConnectionPolicy console_policy();

/// Bridges browser consoles to the facility. It is the registered Director
/// for every console subscription and fans records and reports out to the
/// sessions that asked for them. params: http_port, host, static_dir,
/// styles (overrides), styles_file (read per request), outbox_limit.
///
/// Session messages (JSON text):
///   in:  subscribe {id, target, stream: mapper|monitor, mapper | field,
///                   precision?, latency_ms?}   ("lcu/mapper" shorthand ok)
///        unsubscribe {id, subscription}
///        invoke {id, target, method, args}
///   out: result {id, value} | error {id, error: {code, message}}
///        update {subscription, target, ...} | alert {event, alert}
///        alerts {alerts} (raised alerts, once at open)
class Gateway : public supervisory::Director {
 public:
  Gateway(const registry::ObjectSpec& spec, kernel::ProcessContext& context);
  ~Gateway() override;

  void on_ready() override;
  void on_shutdown() override;

  /// Port the HTTP/WebSocket listener is bound to, once ready.
  std::uint16_t http_port() const;

  json broadview();
  json styles() const;

  /// Takes one outbound message; returns false when the session's outbox is
  /// over its limit, which ends the session.
  /// `disconnect` must only schedule the close; it runs under the gateway lock.
  using Sink = std::function<bool(const std::string&)>;
  std::uint64_t open_session(std::string operator_id, Sink sink, std::function<void()> disconnect);
  void session_message(std::uint64_t session, const std::string& text);
  /// Detaches everything the session subscribed to. Idempotent.
  void close_session(std::uint64_t session);

  std::size_t session_count() const;
  /// Console subscriptions currently held at publishers.
  std::size_t subscription_count() const;
  std::size_t outbox_limit() const { return outbox_limit_; }
  /// Waits until session teardown has finished talking to publishers.
  bool flush_cleanup(Millis timeout) { return cleanup_.drain(timeout); }

 protected:
  void on_record(const std::string& publisher, const std::string& mapper, std::uint64_t subscription,
                 const supervisory::Record& record) override;
  void on_report(const std::string& publisher, std::uint64_t monitor, std::uint64_t seq,
                 const statusmon::StatusReport& report) override;

 private:
  struct Session;
  struct Subscription {
    std::uint64_t id = 0;
    std::uint64_t session = 0;
    std::string target;
    bool mapper = true;
    std::string stream;  // mapper name or field
    std::uint64_t remote = 0;
  };
  struct Pending {
    std::vector<json> messages;
    std::chrono::steady_clock::time_point first;
  };

  void handle(Session& s, const json& message);
  void subscribe(Session& s, const json& m);
  json unsubscribe(Session& s, const json& m);
  json invoke(Session& s, const json& m);
  void release_remote(const Subscription& sub);
  void route(const std::string& key, json message);
  void send(std::uint64_t session, const json& message);
  /// With mu_ held. Sinks and disconnect callbacks must not block or call back in.
  void send_locked(std::uint64_t session, const json& message);
  void broadcast(const json& message);
  std::shared_ptr<conduit::Client> client_for(const std::string& target);
  std::string type_tag_of(const std::string& object) const;

  kernel::ProcessContext& context_;
  registry::ObjectSpec spec_;
  std::size_t outbox_limit_;
  std::optional<registry::FacilityConfig> config_;
  std::optional<conduit::ObjectRef> central_;
  std::shared_ptr<conduit::Client> events_;
  std::shared_ptr<conduit::Client> sysman_;
  std::uint64_t alert_subscription_ = 0;

  mutable std::mutex clients_mu_;
  std::map<std::string, std::shared_ptr<conduit::Client>> clients_;

  mutable std::mutex mu_;
  std::uint64_t next_session_ = 1;
  std::uint64_t next_subscription_ = 1;
  std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;
  std::map<std::uint64_t, Subscription> subscriptions_;
  std::map<std::string, std::uint64_t> routes_;  // publisher|kind|remote -> subscription
  std::map<std::string, Pending> pending_;

  kernel::SerialWorker cleanup_{4096};
  std::unique_ptr<HttpServer> server_;
};

/// Process template with the single `gateway` device type. `http_port`
/// replaces the configured listener port.
std::shared_ptr<const kernel::ProcessTemplate> gateway_template(
    std::optional<std::uint16_t> http_port = std::nullopt);

}  // namespace iccs::gateway
