#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iccs/logging.hpp"
#include "iccs/services/interfaces.hpp"
#include "iccs/value.hpp"

namespace iccs::services {

inline constexpr std::size_t kDefaultStoreCapacity = 65536;

struct LogRecord {
  std::uint64_t seq = 0;
  Timestamp timestamp = 0;
  std::string process;
  log::Severity severity = log::Severity::kInfo;
  std::string text;
};

json to_json(const LogRecord& r);

/// Central message log: one serialized append point, ring-buffer retention,
/// optional newline-delimited JSON mirror on disk.
class LogStore {
 public:
  explicit LogStore(std::size_t capacity = kDefaultStoreCapacity,
                    std::optional<std::filesystem::path> file = std::nullopt);

  std::uint64_t append(std::string process, log::Severity severity, std::string text);
  std::vector<LogRecord> query(log::Severity min_severity = log::Severity::kDebug,
                               std::uint64_t after_seq = 0) const;
  std::size_t size() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::uint64_t next_seq_ = 1;
  std::deque<LogRecord> records_;
  std::ofstream file_;
};

struct Event {
  std::uint64_t seq = 0;
  Timestamp timestamp = 0;
  std::string name;
  std::string source;
  json payload;
};

json to_json(const Event& e);

enum class AlertState { kRaised, kAcknowledged };

struct Alert {
  std::uint64_t id = 0;
  Event event;
  AlertSeverity severity = AlertSeverity::kWarning;
  AlertState state = AlertState::kRaised;
  std::optional<std::string> acked_by;
};

json to_json(const Alert& a);
std::string_view to_string(AlertSeverity s);
AlertSeverity alert_severity_from_string(std::string_view s);  // BAD_ARGS

/// Central event log plus alert book-keeping. Alert observers are told of
/// every raise and acknowledgment.
class EventStore : public EventSink {
 public:
  using AlertObserver = std::function<void(const std::string& kind, const Alert& alert)>;

  explicit EventStore(std::size_t capacity = kDefaultStoreCapacity);

  Event post(std::string name, std::string source, json payload);
  std::vector<Event> query(std::optional<std::string> name = std::nullopt,
                           std::uint64_t after_seq = 0) const;

  void post_event(const std::string& name, const std::string& source, json payload) override;
  std::uint64_t raise_alert(const std::string& name, const std::string& source, json payload,
                            AlertSeverity severity) override;
  /// NO_SUCH_OBJECT for an unknown id, BAD_ARGS when already acknowledged.
  void acknowledge(std::uint64_t id, const std::string& operator_id);
  std::vector<Alert> alerts(std::optional<AlertState> state = std::nullopt) const;

  std::uint64_t observe_alerts(AlertObserver observer);
  void stop_observing(std::uint64_t id);

 private:
  void notify(const std::string& kind, const Alert& alert);

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::uint64_t next_seq_ = 1;
  std::deque<Event> events_;
  std::uint64_t next_alert_ = 1;
  std::map<std::uint64_t, Alert> alerts_;
  std::mutex observers_mu_;
  std::uint64_t next_observer_ = 1;
  std::map<std::uint64_t, AlertObserver> observers_;
};

json to_json(const Reservation& r);

/// Advisory per-device locks. A device honours mutating commands only when
/// presented the current token.
class ReservationTable : public ReservationAuthority {
 public:
  /// With a lease, a reservation not renewed within it lapses.
  explicit ReservationTable(std::optional<Millis> lease = std::nullopt);

  /// RESERVED when another holder has the device; the same holder renews.
  Reservation reserve(const std::string& device, const std::string& holder) override;
  /// BAD_ARGS unless `token` is a live reservation.
  void release(const std::string& token) override;
  bool check(const std::string& device, const std::string& token) override;
  std::optional<Reservation> holder_of(const std::string& device) const;
  std::vector<Reservation> list() const;

 private:
  void expire_locked(Timestamp now) const;
  std::string new_token();

  std::optional<Millis> lease_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Reservation> by_device_;
  std::mt19937_64 rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace iccs::services
