#include "iccs/services/service_objects.hpp"

#include <fmt/format.h>

#include "iccs/logging.hpp"

namespace iccs::services {

LogService::LogService(std::shared_ptr<LogStore> store)
    : Configurable(kLogObject, kernel::Scope::kDistributed, "log_service"),
      store_(std::move(store)) {
  expose("append", [this](const json& a) {
    auto seq = store_->append(a.at("process").get<std::string>(),
                              log::severity_from_string(a.value("severity", "info")),
                              a.at("text").get<std::string>());
    return json{{"seq", seq}};
  });
  expose("query", [this](const json& a) {
    auto min = log::severity_from_string(a.value("min_severity", "debug"));
    json out = json::array();
    for (const auto& r : store_->query(min, a.value("after_seq", std::uint64_t{0}))) {
      if (a.contains("process") && r.process != a["process"].get<std::string>()) continue;
      out.push_back(to_json(r));
    }
    return out;
  });
}

EventService::EventService(std::shared_ptr<EventStore> store)
    : Configurable(kEventsObject, kernel::Scope::kDistributed, "event_service"),
      store_(std::move(store)) {
  observer_id_ = store_->observe_alerts(
      [this](const std::string& kind, const Alert& alert) { fan_out(kind, alert); });

  expose("post", [this](const json& a) {
    auto e = store_->post(a.at("name").get<std::string>(), a.at("source").get<std::string>(),
                          a.value("payload", json(nullptr)));
    return json{{"seq", e.seq}};
  });
  expose("query", [this](const json& a) {
    std::optional<std::string> name;
    if (a.contains("name")) name = a["name"].get<std::string>();
    json out = json::array();
    for (const auto& e : store_->query(name, a.value("after_seq", std::uint64_t{0}))) {
      out.push_back(to_json(e));
    }
    return out;
  });
  expose("raise_alert", [this](const json& a) {
    auto id = store_->raise_alert(a.at("name").get<std::string>(),
                                  a.at("source").get<std::string>(),
                                  a.value("payload", json(nullptr)),
                                  alert_severity_from_string(a.value("severity", "warning")));
    return json{{"id", id}};
  });
  expose("acknowledge", [this](const json& a) {
    store_->acknowledge(a.at("id").get<std::uint64_t>(), a.at("operator").get<std::string>());
    return json(nullptr);
  });
  expose("alerts", [this](const json& a) {
    std::optional<AlertState> state;
    auto s = a.value("state", std::string());
    if (s == "raised") state = AlertState::kRaised;
    if (s == "acknowledged") state = AlertState::kAcknowledged;
    json out = json::array();
    for (const auto& alert : store_->alerts(state)) out.push_back(to_json(alert));
    return out;
  });
  expose("subscribe_alerts", [this](const json& a) {
    auto id = subscribe(conduit::parse_ref(a.at("subscriber").get<std::string>()));
    return json{{"subscription", id}};
  });
  expose("unsubscribe_alerts", [this](const json& a) {
    if (!unsubscribe(a.at("subscription").get<std::uint64_t>())) {
      throw Error(ErrorCode::kNoSuchObject, "no such alert subscription");
    }
    return json(nullptr);
  });
}

EventService::~EventService() {
  store_->stop_observing(observer_id_);
  std::map<std::uint64_t, std::shared_ptr<Subscriber>> live;
  std::vector<std::shared_ptr<Subscriber>> retired;
  {
    std::lock_guard lock(mu_);
    live.swap(subscribers_);
    retired.swap(retired_);
  }
  for (auto& [_, s] : live) s->worker->stop();
  for (auto& s : retired) s->worker->stop();
}

std::uint64_t EventService::subscribe(const conduit::ObjectRef& subscriber) {
  auto sub = std::make_shared<Subscriber>();
  conduit::ConnectionPolicy policy;
  policy.call_timeout = Millis(1000);
  sub->client = std::make_unique<conduit::Client>(subscriber, conduit::ClientOptions{policy, {}, {}});
  sub->worker = std::make_unique<kernel::SerialWorker>(1024);
  std::lock_guard lock(mu_);
  auto id = next_id_++;
  subscribers_.emplace(id, std::move(sub));
  return id;
}

bool EventService::unsubscribe(std::uint64_t id) {
  std::shared_ptr<Subscriber> sub;
  {
    std::lock_guard lock(mu_);
    auto it = subscribers_.find(id);
    if (it == subscribers_.end()) return false;
    sub = it->second;
    subscribers_.erase(it);
  }
  sub->worker->stop();
  return true;
}

void EventService::fan_out(const std::string& kind, const Alert& alert) {
  json message = {{"kind", kind}, {"alert", to_json(alert)}};
  std::lock_guard lock(mu_);
  for (auto& [id, sub] : subscribers_) {
    std::weak_ptr<Subscriber> weak = sub;
    auto sub_id = id;
    sub->worker->post([this, weak, sub_id, message] {
      auto s = weak.lock();
      if (!s) return;
      try {
        s->client->invoke("alert", message);
        s->consecutive_failures = 0;
      } catch (const Error& e) {
        if (++s->consecutive_failures >= 3) {
          log::warning("events: dropping alert subscriber {}: {}", sub_id, e.what());
          // Parked rather than destroyed: this task runs on the subscriber's
          // own worker thread.
          std::lock_guard lock(mu_);
          if (auto it = subscribers_.find(sub_id); it != subscribers_.end()) {
            retired_.push_back(it->second);
            subscribers_.erase(it);
          }
        }
      }
    });
  }
}

ReservationService::ReservationService(std::shared_ptr<ReservationTable> table)
    : Configurable(kReservationsObject, kernel::Scope::kDistributed, "reservation_service"),
      table_(std::move(table)) {
  expose("reserve", [this](const json& a) {
    return to_json(table_->reserve(a.at("device").get<std::string>(),
                                   a.at("holder").get<std::string>()));
  });
  expose("release", [this](const json& a) {
    table_->release(a.at("token").get<std::string>());
    return json(nullptr);
  });
  expose("check", [this](const json& a) {
    return json(table_->check(a.at("device").get<std::string>(), a.value("token", std::string())));
  });
  expose("list", [this](const json&) {
    json out = json::array();
    for (const auto& r : table_->list()) out.push_back(to_json(r));
    return out;
  });
}

}  // namespace iccs::services
