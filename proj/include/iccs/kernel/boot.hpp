#pragma once

#include <memory>
#include <string>
#include <vector>

#include "iccs/kernel/context.hpp"
#include "iccs/kernel/factory.hpp"
#include "iccs/kernel/host.hpp"
#include "iccs/registry/config.hpp"

namespace iccs::registry {
class RegistryClient;
}
namespace iccs::services {
class RemoteEvents;
class RemoteReservations;
class LogForwarder;
}  // namespace iccs::services
namespace iccs::sysman {
class LocalManager;
}

namespace iccs::kernel {

/// Everything that distinguishes one kind of process from another: a
/// controller factory and a device factory.
struct ProcessTemplate {
  std::string name;
  Factory controllers{Scope::kLocal};
  Factory devices{Scope::kDistributed};
};

/// Policy for the framework's own clients (registry, sysman, services).
conduit::ConnectionPolicy framework_policy();

struct BootOptions {
  std::string process;
  conduit::ObjectRef registry;  // `__registry` in the central process
  conduit::ConnectionPolicy policy = framework_policy();
  /// Installs the process-wide log forwarder. Off when several processes
  /// share one address space.
  bool forward_logs = false;
};

class RunningProcess;

/// The generic main program. In order: framework clients, `starting`
/// report, manifest, local then distributed construction, name registration,
/// dispatcher start, `ready` report and heartbeat. A failure is reported to
/// the system manager as `failed` and rethrown.
std::unique_ptr<RunningProcess> boot(std::shared_ptr<const ProcessTemplate> tmpl,
                                     const BootOptions& options);

class RunningProcess {
 public:
  ~RunningProcess();
  RunningProcess(const RunningProcess&) = delete;
  RunningProcess& operator=(const RunningProcess&) = delete;

  const std::string& name() const { return spec_.name; }
  const registry::ProcessSpec& spec() const { return spec_; }
  const ProcessTemplate& process_template() const { return *template_; }
  Host& host() { return *host_; }
  ProcessContext& context() { return context_; }
  /// Hosted configurables in manifest order.
  const std::vector<std::shared_ptr<Configurable>>& objects() const { return objects_; }
  const std::vector<std::string>& registered_names() const { return registered_; }

  /// Graceful stop: objects shut down, `stopped` reported, serving ends.
  void stop();
  /// Abrupt stop without telling anyone, as if the process had died.
  void halt();
  bool stopped() const { return stopped_; }

 private:
  friend std::unique_ptr<RunningProcess> boot(std::shared_ptr<const ProcessTemplate>,
                                              const BootOptions&);
  RunningProcess() = default;
  void shutdown_objects();

  std::shared_ptr<const ProcessTemplate> template_;
  registry::ProcessSpec spec_;
  std::shared_ptr<registry::RegistryClient> registry_;
  std::shared_ptr<services::RemoteEvents> events_;
  std::shared_ptr<services::RemoteReservations> reservations_;
  std::shared_ptr<services::LogForwarder> log_forwarder_;
  std::unique_ptr<sysman::LocalManager> manager_;
  ProcessContext context_;
  std::unique_ptr<Host> host_;
  std::vector<std::shared_ptr<Configurable>> objects_;
  std::vector<std::string> registered_;
  bool forwarding_ = false;
  bool stopped_ = false;
};

}  // namespace iccs::kernel
