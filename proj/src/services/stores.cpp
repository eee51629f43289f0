#include "iccs/services/stores.hpp"

#include <fmt/format.h>

#include "iccs/error.hpp"

namespace iccs::services {

json to_json(const LogRecord& r) {
  return {{"seq", r.seq},
          {"timestamp", r.timestamp},
          {"process", r.process},
          {"severity", log::to_string(r.severity)},
          {"text", r.text}};
}

LogStore::LogStore(std::size_t capacity, std::optional<std::filesystem::path> file)
    : capacity_(capacity ? capacity : 1) {
  if (file) {
    file_.open(*file, std::ios::app);
    if (!file_) throw Error(ErrorCode::kBadArgs, fmt::format("cannot open log file {}", file->string()));
  }
}

std::uint64_t LogStore::append(std::string process, log::Severity severity, std::string text) {
  std::lock_guard lock(mu_);
  LogRecord r{next_seq_++, now_ms(), std::move(process), severity, std::move(text)};
  if (file_.is_open()) {
    file_ << to_json(r).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    file_.flush();
  }
  records_.push_back(std::move(r));
  if (records_.size() > capacity_) records_.pop_front();
  return records_.back().seq;
}

std::vector<LogRecord> LogStore::query(log::Severity min_severity, std::uint64_t after_seq) const {
  std::lock_guard lock(mu_);
  std::vector<LogRecord> out;
  for (const auto& r : records_) {
    if (r.seq > after_seq && r.severity >= min_severity) out.push_back(r);
  }
  return out;
}

std::size_t LogStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

json to_json(const Event& e) {
  return {{"seq", e.seq},
          {"timestamp", e.timestamp},
          {"name", e.name},
          {"source", e.source},
          {"payload", e.payload}};
}

std::string_view to_string(AlertSeverity s) {
  return s == AlertSeverity::kCritical ? "critical" : "warning";
}

AlertSeverity alert_severity_from_string(std::string_view s) {
  if (s == "warning") return AlertSeverity::kWarning;
  if (s == "critical") return AlertSeverity::kCritical;
  throw Error(ErrorCode::kBadArgs, fmt::format("unknown alert severity '{}'", s));
}

json to_json(const Alert& a) {
  json j = {{"id", a.id},
            {"event", to_json(a.event)},
            {"severity", to_string(a.severity)},
            {"state", a.state == AlertState::kRaised ? "raised" : "acknowledged"}};
  if (a.acked_by) j["acked_by"] = *a.acked_by;
  return j;
}

EventStore::EventStore(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

Event EventStore::post(std::string name, std::string source, json payload) {
  std::lock_guard lock(mu_);
  Event e{next_seq_++, now_ms(), std::move(name), std::move(source), std::move(payload)};
  events_.push_back(e);
  if (events_.size() > capacity_) events_.pop_front();
  return e;
}

std::vector<Event> EventStore::query(std::optional<std::string> name,
                                     std::uint64_t after_seq) const {
  std::lock_guard lock(mu_);
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.seq > after_seq && (!name || e.name == *name)) out.push_back(e);
  }
  return out;
}

void EventStore::post_event(const std::string& name, const std::string& source, json payload) {
  post(name, source, std::move(payload));
}

std::uint64_t EventStore::raise_alert(const std::string& name, const std::string& source,
                                      json payload, AlertSeverity severity) {
  Alert alert;
  {
    std::lock_guard lock(mu_);
    Event e{next_seq_++, now_ms(), name, source, std::move(payload)};
    events_.push_back(e);
    if (events_.size() > capacity_) events_.pop_front();
    alert = Alert{next_alert_++, std::move(e), severity, AlertState::kRaised, std::nullopt};
    alerts_.emplace(alert.id, alert);
    // Raised alerts are never evicted; only acknowledged ones age out.
    for (auto it = alerts_.begin(); alerts_.size() > capacity_ && it != alerts_.end();) {
      it = it->second.state == AlertState::kAcknowledged ? alerts_.erase(it) : std::next(it);
    }
  }
  notify("raised", alert);
  return alert.id;
}

void EventStore::acknowledge(std::uint64_t id, const std::string& operator_id) {
  Alert alert;
  {
    std::lock_guard lock(mu_);
    auto it = alerts_.find(id);
    if (it == alerts_.end()) throw Error(ErrorCode::kNoSuchObject, fmt::format("no alert {}", id));
    if (it->second.state == AlertState::kAcknowledged) {
      throw Error(ErrorCode::kBadArgs, fmt::format("alert {} already acknowledged", id));
    }
    it->second.state = AlertState::kAcknowledged;
    it->second.acked_by = operator_id;
    alert = it->second;
  }
  notify("acknowledged", alert);
}

std::vector<Alert> EventStore::alerts(std::optional<AlertState> state) const {
  std::lock_guard lock(mu_);
  std::vector<Alert> out;
  for (const auto& [_, a] : alerts_) {
    if (!state || a.state == *state) out.push_back(a);
  }
  return out;
}

std::uint64_t EventStore::observe_alerts(AlertObserver observer) {
  std::lock_guard lock(observers_mu_);
  auto id = next_observer_++;
  observers_.emplace(id, std::move(observer));
  return id;
}

void EventStore::stop_observing(std::uint64_t id) {
  std::lock_guard lock(observers_mu_);
  observers_.erase(id);
}

void EventStore::notify(const std::string& kind, const Alert& alert) {
  std::lock_guard lock(observers_mu_);
  for (const auto& [_, obs] : observers_) obs(kind, alert);
}

json to_json(const Reservation& r) {
  return {{"device", r.device}, {"holder", r.holder}, {"token", r.token},
          {"acquired_at", r.acquired_at}};
}

ReservationTable::ReservationTable(std::optional<Millis> lease)
    : lease_(lease), rng_(std::random_device{}()) {}

std::string ReservationTable::new_token() {
  return fmt::format("{:016x}{:08x}", rng_(), ++counter_);
}

void ReservationTable::expire_locked(Timestamp now) const {
  if (!lease_) return;
  std::erase_if(by_device_,
                [&](const auto& kv) { return now - kv.second.acquired_at > lease_->count(); });
}

Reservation ReservationTable::reserve(const std::string& device, const std::string& holder) {
  std::lock_guard lock(mu_);
  auto now = now_ms();
  expire_locked(now);
  auto it = by_device_.find(device);
  if (it != by_device_.end()) {
    if (it->second.holder != holder) {
      throw Error(ErrorCode::kReserved,
                  fmt::format("{} is reserved by {}", device, it->second.holder));
    }
    it->second.acquired_at = now;  // renewal keeps the token
    return it->second;
  }
  Reservation r{device, holder, new_token(), now};
  by_device_.emplace(device, r);
  return r;
}

void ReservationTable::release(const std::string& token) {
  std::lock_guard lock(mu_);
  expire_locked(now_ms());
  for (auto it = by_device_.begin(); it != by_device_.end(); ++it) {
    if (it->second.token == token) {
      by_device_.erase(it);
      return;
    }
  }
  throw Error(ErrorCode::kBadArgs, "no live reservation with that token");
}

bool ReservationTable::check(const std::string& device, const std::string& token) {
  std::lock_guard lock(mu_);
  expire_locked(now_ms());
  auto it = by_device_.find(device);
  return it != by_device_.end() && it->second.token == token;
}

std::optional<Reservation> ReservationTable::holder_of(const std::string& device) const {
  std::lock_guard lock(mu_);
  expire_locked(now_ms());
  auto it = by_device_.find(device);
  if (it == by_device_.end()) return std::nullopt;
  return it->second;
}

std::vector<Reservation> ReservationTable::list() const {
  std::lock_guard lock(mu_);
  expire_locked(now_ms());
  std::vector<Reservation> out;
  for (const auto& [_, r] : by_device_) out.push_back(r);
  return out;
}

}  // namespace iccs::services
