#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "iccs/kernel/configurable.hpp"
#include "iccs/kernel/context.hpp"
#include "iccs/statusmon/deadband.hpp"

namespace iccs::statusmon {

/// Base for devices that support status monitoring. Derived classes declare
/// their monitorable fields; subscribers then call begin_monitoring /
/// end_monitoring. Each monitor polls inside this process at its latency and
/// delivers significant changes as `update {publisher, monitor, seq, report}`.
class MonitoredDevice : public kernel::Configurable {
 public:
  MonitoredDevice(const registry::ObjectSpec& spec, kernel::ProcessContext& context);
  ~MonitoredDevice() override;

  void on_shutdown() override;

  /// Returns the monitor id. A repeat request for the same field and
  /// subscriber replaces the earlier monitor.
  std::uint64_t begin_monitoring(const std::string& field, double precision, Millis latency,
                                 const conduit::ObjectRef& subscriber);
  void end_monitoring(std::uint64_t id);  // NO_SUCH_OBJECT

  std::vector<std::string> monitored_fields() const;
  std::size_t active_monitors() const;
  std::uint64_t samples_taken() const { return samples_.load(); }
  std::uint64_t reports_dropped() const { return dropped_.load(); }

 protected:
  using Sampler = std::function<FieldValue()>;
  void monitor_field(std::string field, Sampler sampler);

 private:
  struct Monitor;
  void poll(Monitor& m);
  void emit(Monitor& m, const StatusReport& report);
  void retire(std::shared_ptr<Monitor> m);
  void reap_abandoned();

  kernel::ProcessContext& context_;
  std::map<std::string, Sampler, std::less<>> fields_;
  mutable std::mutex mu_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, std::shared_ptr<Monitor>> monitors_;
  std::atomic<std::uint64_t> samples_{0};
  std::atomic<std::uint64_t> dropped_{0};
};

/// Outbox bound per monitor; beyond it the oldest report is dropped.
inline constexpr std::size_t kMonitorOutbox = 256;
/// Consecutive failed deliveries after which a monitor gives up.
inline constexpr int kMonitorDeliveryFailures = 5;

}  // namespace iccs::statusmon
