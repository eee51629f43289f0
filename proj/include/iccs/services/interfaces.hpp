#pragma once

#include <cstdint>
#include <string>

#include "iccs/value.hpp"

namespace iccs::services {

enum class AlertSeverity { kWarning, kCritical };

/// Where a process posts events and raises alerts.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void post_event(const std::string& name, const std::string& source, json payload) = 0;
  virtual std::uint64_t raise_alert(const std::string& name, const std::string& source,
                                    json payload, AlertSeverity severity) = 0;
};

struct Reservation {
  std::string device;
  std::string holder;
  std::string token;
  Timestamp acquired_at = 0;
};

/// Grants device reservations and answers whether `token` is the live
/// reservation on `device`.
class ReservationAuthority {
 public:
  virtual ~ReservationAuthority() = default;
  /// RESERVED when another holder has the device; the same holder renews.
  virtual Reservation reserve(const std::string& device, const std::string& holder) = 0;
  virtual void release(const std::string& token) = 0;  // BAD_ARGS when not live
  virtual bool check(const std::string& device, const std::string& token) = 0;
};

}  // namespace iccs::services
