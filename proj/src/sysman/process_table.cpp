#include "iccs/sysman/process_table.hpp"

#include <fmt/format.h>

#include "iccs/error.hpp"

namespace iccs::sysman {

using registry::Category;

std::string_view to_string(ProcessState s) {
  switch (s) {
    case ProcessState::kPending: return "pending";
    case ProcessState::kStarting: return "starting";
    case ProcessState::kReady: return "ready";
    case ProcessState::kFailed: return "failed";
    case ProcessState::kStopped: return "stopped";
  }
  return "pending";
}

ProcessState process_state_from_string(std::string_view s) {
  for (auto state : {ProcessState::kPending, ProcessState::kStarting, ProcessState::kReady,
                     ProcessState::kFailed, ProcessState::kStopped}) {
    if (to_string(state) == s) return state;
  }
  throw Error(ErrorCode::kBadArgs, fmt::format("unknown process state '{}'", s));
}

json to_json(const ProcessRecord& r) {
  json j = {{"name", r.name},
            {"category", registry::to_string(r.category)},
            {"state", to_string(r.state)},
            {"last_heartbeat", r.last_heartbeat},
            {"pid", r.pid},
            {"endpoint", r.endpoint}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

StartPlan plan(const registry::FacilityConfig& config) {
  StartPlan p;
  p.phases.resize(3);
  for (const auto& proc : config.processes) {
    switch (proc.category) {
      case Category::kFep: p.phases[0].push_back(proc.name); break;
      case Category::kSupervisor: p.phases[1].push_back(proc.name); break;
      case Category::kGateway: p.phases[2].push_back(proc.name); break;
    }
  }
  return p;
}

json to_json(const StartPlan& p) { return p.phases; }

namespace {

bool legal(ProcessState from, ProcessState to) {
  using S = ProcessState;
  switch (from) {
    case S::kPending: return to == S::kStarting || to == S::kFailed || to == S::kStopped;
    case S::kStarting: return to == S::kReady || to == S::kFailed || to == S::kStopped;
    case S::kReady: return to == S::kReady || to == S::kFailed || to == S::kStopped;
    case S::kFailed:
    case S::kStopped: return false;
  }
  return false;
}

}  // namespace

ProcessTable::ProcessTable(const registry::FacilityConfig& config) {
  for (const auto& p : config.processes) {
    order_.push_back(p.name);
    Entry e;
    e.record.name = p.name;
    e.record.category = p.category;
    entries_.emplace(p.name, std::move(e));
  }
}

void ProcessTable::set_observer(Observer observer) {
  std::lock_guard lock(mu_);
  observer_ = std::move(observer);
}

ProcessTable::Entry& ProcessTable::entry_locked(const std::string& process) {
  auto it = entries_.find(process);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kNoSuchObject, fmt::format("unknown process '{}'", process));
  }
  return it->second;
}

Transition ProcessTable::apply_locked(Entry& e, ProcessState to) {
  Transition t{e.record.name, e.record.state, to,
               to == ProcessState::kFailed ? e.record.reason : std::string()};
  e.record.state = to;
  e.heard = Clock::now();
  if (to == ProcessState::kReady) e.record.last_heartbeat = now_ms();
  bool heartbeat = t.from == ProcessState::kReady && to == ProcessState::kReady;
  if (!heartbeat && observer_) observer_(t);
  cv_.notify_all();
  return t;
}

Transition ProcessTable::report(const std::string& process, ProcessState to, const json& info) {
  std::lock_guard lock(mu_);
  auto& e = entry_locked(process);
  if (is_terminal(to) && e.record.state == to) return Transition{process, to, to, {}};
  // A heartbeat already in flight when the manager stopped the process.
  if (e.record.state == ProcessState::kStopped && to == ProcessState::kReady) {
    return Transition{process, ProcessState::kStopped, ProcessState::kStopped, {}};
  }
  if (!legal(e.record.state, to)) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: illegal transition {} -> {}", process,
                                                 to_string(e.record.state), to_string(to)));
  }
  if (info.is_object()) {
    if (info.contains("pid")) e.record.pid = info["pid"].get<int>();
    if (info.contains("endpoint")) e.record.endpoint = info["endpoint"].get<std::string>();
    if (info.contains("reason")) e.record.reason = info["reason"].get<std::string>();
  }
  return apply_locked(e, to);
}

std::optional<Transition> ProcessTable::fail(const std::string& process, const std::string& reason) {
  std::lock_guard lock(mu_);
  auto& e = entry_locked(process);
  if (is_terminal(e.record.state)) return std::nullopt;
  e.record.reason = reason;
  return apply_locked(e, ProcessState::kFailed);
}

std::optional<Transition> ProcessTable::stop(const std::string& process) {
  std::lock_guard lock(mu_);
  auto& e = entry_locked(process);
  if (is_terminal(e.record.state)) return std::nullopt;
  return apply_locked(e, ProcessState::kStopped);
}

void ProcessTable::relaunch(const std::string& process) {
  std::lock_guard lock(mu_);
  auto& e = entry_locked(process);
  if (!is_terminal(e.record.state) && e.record.state != ProcessState::kPending) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{} is still {}", process, to_string(e.record.state)));
  }
  e.record.reason.clear();
  e.record.pid = 0;
  if (e.record.state != ProcessState::kPending) apply_locked(e, ProcessState::kPending);
}

void ProcessTable::set_pid(const std::string& process, int pid) {
  std::lock_guard lock(mu_);
  entry_locked(process).record.pid = pid;
}

ProcessRecord ProcessTable::get(const std::string& process) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(process);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kNoSuchObject, fmt::format("unknown process '{}'", process));
  }
  return it->second.record;
}

std::vector<ProcessRecord> ProcessTable::snapshot_locked() const {
  std::vector<ProcessRecord> out;
  for (const auto& name : order_) out.push_back(entries_.at(name).record);
  return out;
}

std::vector<ProcessRecord> ProcessTable::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_locked();
}

std::vector<std::string> ProcessTable::overdue(Millis silence) const {
  std::lock_guard lock(mu_);
  auto now = Clock::now();
  std::vector<std::string> out;
  for (const auto& name : order_) {
    const auto& e = entries_.at(name);
    if (e.record.state == ProcessState::kReady && now - e.heard > silence) out.push_back(name);
  }
  return out;
}

bool ProcessTable::wait(const std::function<bool(const std::vector<ProcessRecord>&)>& pred,
                        Millis timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return pred(snapshot_locked()); });
}

}  // namespace iccs::sysman
