#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "iccs/conduit/client.hpp"
#include "iccs/kernel/configurable.hpp"
#include "iccs/kernel/serial_worker.hpp"
#include "iccs/services/stores.hpp"

namespace iccs::services {

inline constexpr const char* kLogObject = "__log";
inline constexpr const char* kEventsObject = "__events";
inline constexpr const char* kReservationsObject = "__reservations";

/// `__log`: append, query.
class LogService : public kernel::Configurable {
 public:
  explicit LogService(std::shared_ptr<LogStore> store);
  bool reentrant() const override { return true; }

 private:
  std::shared_ptr<LogStore> store_;
};

/// `__events`: post, query, raise_alert, acknowledge, alerts,
/// subscribe_alerts, unsubscribe_alerts. Subscribers receive
/// `alert {kind, alert}` calls in raise/ack order.
class EventService : public kernel::Configurable {
 public:
  explicit EventService(std::shared_ptr<EventStore> store);
  ~EventService() override;
  bool reentrant() const override { return true; }

  std::uint64_t subscribe(const conduit::ObjectRef& subscriber);
  bool unsubscribe(std::uint64_t id);

 private:
  struct Subscriber {
    std::unique_ptr<conduit::Client> client;
    std::unique_ptr<kernel::SerialWorker> worker;
    int consecutive_failures = 0;
  };

  void fan_out(const std::string& kind, const Alert& alert);

  std::shared_ptr<EventStore> store_;
  std::uint64_t observer_id_ = 0;
  std::mutex mu_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, std::shared_ptr<Subscriber>> subscribers_;
  std::vector<std::shared_ptr<Subscriber>> retired_;
};

/// `__reservations`: reserve, release, check, list.
class ReservationService : public kernel::Configurable {
 public:
  explicit ReservationService(std::shared_ptr<ReservationTable> table);
  bool reentrant() const override { return true; }

 private:
  std::shared_ptr<ReservationTable> table_;
};

}  // namespace iccs::services
