#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iccs/registry/config.hpp"
#include "iccs/value.hpp"

namespace iccs::sysman {

enum class ProcessState { kPending, kStarting, kReady, kFailed, kStopped };

std::string_view to_string(ProcessState s);
ProcessState process_state_from_string(std::string_view s);  // BAD_ARGS

inline bool is_terminal(ProcessState s) {
  return s == ProcessState::kFailed || s == ProcessState::kStopped;
}

struct ProcessRecord {
  std::string name;
  registry::Category category = registry::Category::kFep;
  ProcessState state = ProcessState::kPending;
  Timestamp last_heartbeat = 0;
  int pid = 0;
  std::string endpoint;  // host:port once the process has bound
  std::string reason;    // why it failed, if it did
};

json to_json(const ProcessRecord& r);

/// Phase 0 holds every FEP, phase 1 every supervisor, phase 2 every gateway,
/// each in config order.
struct StartPlan {
  std::vector<std::vector<std::string>> phases;
};

StartPlan plan(const registry::FacilityConfig& config);
json to_json(const StartPlan& p);

struct Transition {
  std::string process;
  ProcessState from;
  ProcessState to;
  std::string reason;  // set when `to` is failed
};

/// The system manager's state machine. All mutations go through one lock and
/// the observer runs under it, so observed transitions are totally ordered.
class ProcessTable {
 public:
  using Observer = std::function<void(const Transition&)>;
  using Clock = std::chrono::steady_clock;

  explicit ProcessTable(const registry::FacilityConfig& config);

  void set_observer(Observer observer);

  /// A state report from the process itself. ready -> ready is a heartbeat and
  /// is not observed. `info` may carry pid and endpoint.
  /// NO_SUCH_OBJECT for an unknown process, BAD_ARGS for an illegal transition.
  Transition report(const std::string& process, ProcessState to, const json& info = json::object());

  /// Manager-side terminal transitions. Empty when already terminal.
  std::optional<Transition> fail(const std::string& process, const std::string& reason);
  std::optional<Transition> stop(const std::string& process);

  /// Returns a terminal process to pending ahead of a relaunch.
  void relaunch(const std::string& process);
  void set_pid(const std::string& process, int pid);

  ProcessRecord get(const std::string& process) const;
  std::vector<ProcessRecord> snapshot() const;

  /// Ready processes that have been silent for longer than `silence`.
  std::vector<std::string> overdue(Millis silence) const;

  /// Waits until `pred` holds over the table; false on timeout.
  bool wait(const std::function<bool(const std::vector<ProcessRecord>&)>& pred, Millis timeout) const;

 private:
  struct Entry {
    ProcessRecord record;
    Clock::time_point heard;
  };
  Entry& entry_locked(const std::string& process);
  Transition apply_locked(Entry& e, ProcessState to);
  std::vector<ProcessRecord> snapshot_locked() const;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
  Observer observer_;
};

}  // namespace iccs::sysman
