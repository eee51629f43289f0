#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <optional>
#include <thread>

#include "iccs/kernel/host.hpp"
#include "iccs/registry/config.hpp"
#include "iccs/registry/name_service.hpp"
#include "iccs/services/stores.hpp"
#include "iccs/sysman/process_table.hpp"
#include "iccs/sysman/spawner.hpp"

namespace iccs::sysman {

struct SysmanOptions {
  /// Relaunch a failed process instead of only reporting it.
  bool restart = false;
  /// How long a launch phase may take to become ready.
  Millis phase_timeout{10000};
  std::shared_ptr<Spawner> spawner;
  std::optional<std::filesystem::path> log_file;
  std::optional<Millis> reservation_lease;
  /// Overrides the config's central endpoint port (0 picks a free one).
  std::optional<std::uint16_t> port;
};

/// The central process: registry, shared services and the process state
/// machine, plus ordered launch and termination watching.
class SystemManager {
 public:
  SystemManager(registry::FacilityConfig config, SysmanOptions options);
  ~SystemManager();
  SystemManager(const SystemManager&) = delete;
  SystemManager& operator=(const SystemManager&) = delete;

  /// Serves the central objects and begins watching.
  void start();
  /// Spawns phase by phase. APP_ERROR if a process fails or times out before
  /// its phase is ready; later phases are then not spawned.
  void launch();
  /// Stops every managed process, gateways first.
  void shutdown();
  /// Blocks until a shutdown is requested over the wire or `stop_waiting`.
  void wait_for_shutdown_request();
  void stop_waiting();

  conduit::ObjectRef registry_ref() const;
  conduit::ObjectRef ref_for(const std::string& object) const { return host_->ref_for(object); }
  const registry::FacilityConfig& config() const { return config_; }
  const StartPlan& start_plan() const { return plan_; }

  ProcessTable& table() { return table_; }
  registry::NameService& names() { return *names_; }
  services::LogStore& logs() { return *logs_; }
  services::EventStore& events() { return *events_; }
  services::ReservationTable& reservations() { return *reservations_; }
  kernel::Host& host() { return *host_; }

  /// Forwards a fault to the process's `__fault` object.
  void inject(const std::string& process, const json& fault);

 private:
  void watch_loop();
  void on_failed(const std::string& process, const std::string& reason);
  void spawn(const std::string& process);

  registry::FacilityConfig config_;
  SysmanOptions options_;
  StartPlan plan_;
  ProcessTable table_;
  std::shared_ptr<registry::NameService> names_;
  std::shared_ptr<services::LogStore> logs_;
  std::shared_ptr<services::EventStore> events_;
  std::shared_ptr<services::ReservationTable> reservations_;
  std::unique_ptr<kernel::Host> host_;

  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  bool shutdown_requested_ = false;
  std::atomic<bool> launched_{false};
  std::thread watcher_;
  std::vector<std::thread> relaunchers_;
};

}  // namespace iccs::sysman
