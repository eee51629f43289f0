#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "iccs/conduit/client.hpp"
#include "iccs/supervisory/lcu.hpp"

namespace iccs::facility {

enum class AlignPhase { kIdle, kAligning, kAligned, kFault };
std::string_view to_string(AlignPhase p);

/// Closes the loop between an actuator and a sensor by coordinate descent.
/// Everything it learns about the devices arrives through status monitors
/// (sensor value, actuator moves_completed, shutter state) opened in
/// on_ready. params: actuator, sensor, shutter, operator, latency_ms,
/// step (0.1), min_step (0.001).
///
/// Methods: align {threshold, max_iters}, abort, reset, plus the LCU set.
/// Mappers: summary (phase, best, iteration), positions (p0..), signal
/// (sensor, shutter).
class AlignmentLcu : public supervisory::Lcu {
 public:
  AlignmentLcu(const registry::ObjectSpec& spec, kernel::ProcessContext& context);
  ~AlignmentLcu() override;

  void on_ready() override;
  void on_shutdown() override;

  /// Starts an alignment run in the background. APP_ERROR unless idle;
  /// RESERVED when the actuator is held by someone else.
  void align(double threshold, int max_iters);
  /// Ends a run in progress as a fault.
  void abort();
  /// aligned or fault back to idle. APP_ERROR while aligning.
  void reset();

  AlignPhase phase() const;
  /// Blocks until the phase is no longer aligning.
  AlignPhase wait_settled(Millis timeout) const;
  std::size_t monitors_open() const;

 protected:
  void on_report(const std::string& publisher, std::uint64_t monitor, std::uint64_t seq,
                 const statusmon::StatusReport& report) override;

 private:
  struct Observed {
    std::optional<double> sensor;
    std::uint64_t sensor_reports = 0;
    std::optional<std::uint64_t> moves_completed;
    std::string shutter = "unknown";
  };

  void run(double threshold, int max_iters, std::string token);
  double trial_move(const std::vector<double>& targets, const std::string& token);
  void set_phase(AlignPhase p, json extra = json::object());
  void close_monitors();

  kernel::ProcessContext& context_;
  std::string actuator_name_;
  std::string sensor_name_;
  std::string shutter_name_;
  std::string operator_;
  Millis latency_;
  double initial_step_;
  double min_step_;

  std::shared_ptr<conduit::Client> actuator_;
  std::shared_ptr<conduit::Client> sensor_;
  std::shared_ptr<conduit::Client> shutter_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  AlignPhase phase_ = AlignPhase::kIdle;
  Observed observed_;
  std::uint64_t sensor_monitor_ = 0;
  std::uint64_t actuator_monitor_ = 0;
  std::uint64_t shutter_monitor_ = 0;
  std::atomic<bool> abort_{false};
  std::thread worker_;
};

}  // namespace iccs::facility
