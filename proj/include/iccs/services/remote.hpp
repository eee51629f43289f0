#pragma once

#include <memory>
#include <string>

#include "iccs/conduit/client.hpp"
#include "iccs/kernel/serial_worker.hpp"
#include "iccs/logging.hpp"
#include "iccs/services/interfaces.hpp"
#include "iccs/services/stores.hpp"

namespace iccs::services {

/// Client side of `__events`. Events are posted asynchronously in order;
/// alerts are raised synchronously so the caller gets the id.
class RemoteEvents : public EventSink {
 public:
  RemoteEvents(conduit::ObjectRef events, conduit::ConnectionPolicy policy);
  ~RemoteEvents() override;

  void post_event(const std::string& name, const std::string& source, json payload) override;
  std::uint64_t raise_alert(const std::string& name, const std::string& source, json payload,
                            AlertSeverity severity) override;
  void acknowledge(std::uint64_t id, const std::string& operator_id);
  json alerts(const std::string& state = "");
  bool flush(Millis timeout) { return sender_.drain(timeout); }

 private:
  conduit::Client client_;
  kernel::SerialWorker sender_;
};

/// Client side of `__reservations`.
class RemoteReservations : public ReservationAuthority {
 public:
  RemoteReservations(conduit::ObjectRef reservations, conduit::ConnectionPolicy policy);

  Reservation reserve(const std::string& device, const std::string& holder) override;
  void release(const std::string& token) override;
  bool check(const std::string& device, const std::string& token) override;

 private:
  conduit::Client client_;
};

/// Ships process log messages to `__log` without blocking the writer.
class LogForwarder {
 public:
  LogForwarder(conduit::ObjectRef log, std::string process, conduit::ConnectionPolicy policy);

  void forward(log::Severity severity, const std::string& text);
  bool flush(Millis timeout) { return sender_.drain(timeout); }

 private:
  std::string process_;
  conduit::Client client_;
  kernel::SerialWorker sender_;
};

Reservation reservation_from_json(const json& j);

}  // namespace iccs::services
