#include "iccs/services/remote.hpp"

namespace iccs::services {

RemoteEvents::RemoteEvents(conduit::ObjectRef events, conduit::ConnectionPolicy policy)
    : client_(std::move(events), conduit::ClientOptions{policy, {}, {}}), sender_(4096) {}

RemoteEvents::~RemoteEvents() {
  sender_.drain(Millis(1000));
  sender_.stop();
}

void RemoteEvents::post_event(const std::string& name, const std::string& source, json payload) {
  json args = {{"name", name}, {"source", source}, {"payload", std::move(payload)}};
  sender_.post([this, args = std::move(args)] {
    try {
      client_.invoke("post", args);
    } catch (const Error& e) {
      log::warning("events: post failed: {}", e.what());
    }
  });
}

std::uint64_t RemoteEvents::raise_alert(const std::string& name, const std::string& source,
                                        json payload, AlertSeverity severity) {
  // Preserve ordering with events already queued.
  sender_.drain(client_.policy().worst_case());
  auto reply = client_.invoke("raise_alert", {{"name", name},
                                              {"source", source},
                                              {"payload", std::move(payload)},
                                              {"severity", to_string(severity)}});
  return reply.at("id").get<std::uint64_t>();
}

void RemoteEvents::acknowledge(std::uint64_t id, const std::string& operator_id) {
  client_.invoke("acknowledge", {{"id", id}, {"operator", operator_id}});
}

json RemoteEvents::alerts(const std::string& state) {
  json args = json::object();
  if (!state.empty()) args["state"] = state;
  return client_.invoke("alerts", args);
}

Reservation reservation_from_json(const json& j) {
  return Reservation{j.at("device").get<std::string>(), j.at("holder").get<std::string>(),
                     j.at("token").get<std::string>(), j.value("acquired_at", Timestamp{0})};
}

RemoteReservations::RemoteReservations(conduit::ObjectRef reservations,
                                       conduit::ConnectionPolicy policy)
    : client_(std::move(reservations), conduit::ClientOptions{policy, {}, {}}) {}

Reservation RemoteReservations::reserve(const std::string& device, const std::string& holder) {
  return reservation_from_json(client_.invoke("reserve", {{"device", device}, {"holder", holder}}));
}

void RemoteReservations::release(const std::string& token) {
  client_.invoke("release", {{"token", token}});
}

bool RemoteReservations::check(const std::string& device, const std::string& token) {
  return client_.invoke("check", {{"device", device}, {"token", token}}).get<bool>();
}

LogForwarder::LogForwarder(conduit::ObjectRef log, std::string process,
                           conduit::ConnectionPolicy policy)
    : process_(std::move(process)),
      client_(std::move(log), conduit::ClientOptions{policy, {}, {}}),
      sender_(4096) {}

void LogForwarder::forward(log::Severity severity, const std::string& text) {
  json args = {{"process", process_}, {"severity", log::to_string(severity)}, {"text", text}};
  sender_.post([this, args = std::move(args)] {
    log::NoForwardScope quiet;
    try {
      client_.invoke("append", args);
    } catch (const Error&) {
      // The central log is gone; stderr already has the message.
    }
  });
}

}  // namespace iccs::services
