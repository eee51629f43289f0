#include "iccs/sysman/system_manager.hpp"

#include <fmt/format.h>

#include "iccs/logging.hpp"
#include "iccs/registry/registry_service.hpp"
#include "iccs/services/service_objects.hpp"
#include "iccs/sysman/local_manager.hpp"

namespace iccs::sysman {

namespace {

/// `__sysman`: report, query_states, plan, inject, shutdown.
class SysmanService : public kernel::Configurable {
 public:
  SysmanService(SystemManager& manager, std::function<void()> shutdown)
      : Configurable(kSysmanObject, kernel::Scope::kDistributed, "system_manager") {
    expose("report", [&manager](const json& a) {
      auto process = a.at("process").get<std::string>();
      auto to = process_state_from_string(a.at("state").get<std::string>());
      manager.table().report(process, to, a);
      if (to == ProcessState::kStopped) manager.names().remove_process(process);
      return json(nullptr);
    });
    expose("query_states", [&manager](const json&) {
      json out = json::array();
      for (const auto& r : manager.table().snapshot()) out.push_back(to_json(r));
      return out;
    });
    expose("plan", [&manager](const json&) { return to_json(manager.start_plan()); });
    expose("inject", [&manager](const json& a) {
      manager.inject(a.at("process").get<std::string>(), a.at("fault"));
      return json(nullptr);
    });
    expose("shutdown", [shutdown](const json&) {
      shutdown();
      return json(nullptr);
    });
  }
  bool reentrant() const override { return true; }
};

}  // namespace

SystemManager::SystemManager(registry::FacilityConfig config, SysmanOptions options)
    : config_(std::move(config)),
      options_(std::move(options)),
      plan_(plan(config_)),
      table_(config_),
      names_(std::make_shared<registry::NameService>()),
      logs_(std::make_shared<services::LogStore>(services::kDefaultStoreCapacity, options_.log_file)),
      events_(std::make_shared<services::EventStore>()),
      reservations_(std::make_shared<services::ReservationTable>(options_.reservation_lease)) {
  host_ = std::make_unique<kernel::Host>(kernel::HostOptions{
      "sysman", config_.central.host, options_.port.value_or(config_.central.port), 16});
  // Runs under the table lock: the event log order is the transition order,
  // and a failure's alert exists before anyone can observe the failed state.
  table_.set_observer([this](const Transition& t) {
    events_->post("process_state", "sysman",
                  {{"process", t.process}, {"from", to_string(t.from)}, {"to", to_string(t.to)}});
    if (t.to == ProcessState::kFailed) {
      on_failed(t.process, t.reason.empty() ? "reported failure" : t.reason);
    }
  });
  host_->add(std::make_shared<registry::RegistryService>(names_, config_));
  host_->add(std::make_shared<services::LogService>(logs_));
  host_->add(std::make_shared<services::EventService>(events_));
  host_->add(std::make_shared<services::ReservationService>(reservations_));
  host_->add(std::make_shared<SysmanService>(
      *this, [this] {
        std::lock_guard lock(mu_);
        shutdown_requested_ = true;
        cv_.notify_all();
      }));
}

SystemManager::~SystemManager() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (watcher_.joinable()) watcher_.join();
  for (auto& t : relaunchers_) {
    if (t.joinable()) t.join();
  }
  host_->stop();
}

conduit::ObjectRef SystemManager::registry_ref() const {
  return host_->ref_for(registry::kRegistryObject);
}

void SystemManager::start() {
  host_->start();
  log::info("sysman: serving {} on port {}", config_.facility_name, host_->port());
  if (!watcher_.joinable()) watcher_ = std::thread([this] { watch_loop(); });
}

void SystemManager::spawn(const std::string& process) {
  if (!options_.spawner) throw Error(ErrorCode::kAppError, "no spawner configured");
  const auto* spec = config_.find_process(process);
  if (table_.get(process).state != ProcessState::kPending) table_.relaunch(process);
  try {
    table_.set_pid(process, options_.spawner->spawn(*spec, registry_ref()));
  } catch (const Error& e) {
    table_.fail(process, e.what());
  }
}

void SystemManager::launch() {
  launched_ = false;
  for (std::size_t phase = 0; phase < plan_.phases.size(); ++phase) {
    const auto& members = plan_.phases[phase];
    if (members.empty()) continue;
    for (const auto& p : members) spawn(p);

    auto member = [&](const ProcessRecord& r) {
      return std::find(members.begin(), members.end(), r.name) != members.end();
    };
    bool settled = table_.wait(
        [&](const std::vector<ProcessRecord>& records) {
          bool all_ready = true;
          for (const auto& r : records) {
            if (!member(r)) continue;
            if (is_terminal(r.state)) return true;
            if (r.state != ProcessState::kReady) all_ready = false;
          }
          return all_ready;
        },
        options_.phase_timeout);

    std::vector<std::string> broken;
    for (const auto& r : table_.snapshot()) {
      if (!member(r) || r.state == ProcessState::kReady) continue;
      if (!settled) table_.fail(r.name, "did not become ready in time");
      broken.push_back(r.name);
    }
    if (!broken.empty()) {
      auto why = fmt::format("launch halted in phase {}: {} not ready", phase + 1,
                             fmt::join(broken, ", "));
      events_->raise_alert("launch_halted", "sysman", {{"phase", phase + 1}, {"processes", broken}},
                           services::AlertSeverity::kCritical);
      throw Error(ErrorCode::kAppError, why);
    }
  }
  launched_ = true;
  log::info("sysman: facility {} is up", config_.facility_name);
}

void SystemManager::shutdown() {
  launched_ = false;
  for (auto phase = plan_.phases.rbegin(); phase != plan_.phases.rend(); ++phase) {
    for (const auto& p : *phase) {
      if (table_.stop(p)) {
        names_->remove_process(p);
        if (options_.spawner) options_.spawner->terminate(p);
      }
    }
  }
}

void SystemManager::wait_for_shutdown_request() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return shutdown_requested_ || stopping_; });
}

void SystemManager::stop_waiting() {
  std::lock_guard lock(mu_);
  stopping_ = true;
  cv_.notify_all();
}

void SystemManager::inject(const std::string& process, const json& fault) {
  auto record = table_.get(process);
  if (record.endpoint.empty() || is_terminal(record.state)) {
    throw Error(ErrorCode::kNoSuchObject, fmt::format("{} is not running", process));
  }
  auto ref = conduit::parse_ref(fmt::format("ref://{}/{}/{}", record.endpoint, process,
                                            kernel::kFaultObject));
  conduit::ConnectionPolicy policy;
  conduit::invoke(ref, "set", fault, policy);
}

void SystemManager::on_failed(const std::string& process, const std::string& reason) {
  auto removed = names_->remove_process(process);
  log::error("sysman: {} failed ({}); {} names withdrawn", process, reason, removed);
  events_->raise_alert("process_failed", "sysman", {{"process", process}, {"reason", reason}},
                       services::AlertSeverity::kCritical);
  if (!options_.restart || !launched_) return;
  std::lock_guard lock(mu_);
  if (stopping_) return;
  relaunchers_.emplace_back([this, process] {
    if (options_.spawner) options_.spawner->terminate(process);
    log::warning("sysman: relaunching {}", process);
    spawn(process);
  });
}

void SystemManager::watch_loop() {
  const auto tick = std::max(config_.heartbeat_period / 4, Millis(5));
  const auto silence = config_.heartbeat_period * config_.missed_limit;
  std::unique_lock lock(mu_);
  while (!cv_.wait_for(lock, tick, [&] { return stopping_; })) {
    lock.unlock();
    if (options_.spawner) {
      for (const auto& exit : options_.spawner->reap()) {
        table_.fail(exit.process, describe_exit(exit.status));
      }
    }
    for (const auto& p : table_.overdue(silence)) {
      table_.fail(p, "missed heartbeats");
    }
    lock.lock();
  }
}

}  // namespace iccs::sysman
