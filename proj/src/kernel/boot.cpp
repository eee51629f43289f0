#include "iccs/kernel/boot.hpp"

#include <unistd.h>

#include <fmt/format.h>

#include "iccs/logging.hpp"
#include "iccs/registry/registry_service.hpp"
#include "iccs/services/remote.hpp"
#include "iccs/services/service_objects.hpp"
#include "iccs/sysman/local_manager.hpp"

namespace iccs::kernel {

conduit::ConnectionPolicy framework_policy() {
  conduit::ConnectionPolicy p;
  p.wait_for_presence = true;
  p.max_attempts = 20;
  p.retry_backoff = Millis(100);
  p.call_timeout = Millis(2000);
  return p;
}

std::unique_ptr<RunningProcess> boot(std::shared_ptr<const ProcessTemplate> tmpl,
                                     const BootOptions& options) {
  std::unique_ptr<RunningProcess> proc(new RunningProcess());
  proc->template_ = std::move(tmpl);
  const auto& central = options.registry;

  // (1) Framework clients.
  proc->registry_ = std::make_shared<registry::RegistryClient>(central, options.policy);
  auto config = proc->registry_->config();
  const auto* spec = config.find_process(options.process);
  if (!spec) {
    throw Error(ErrorCode::kNoSuchObject,
                fmt::format("no process '{}' in the facility configuration", options.process));
  }
  proc->spec_ = *spec;
  proc->events_ = std::make_shared<services::RemoteEvents>(
      central.with_object(services::kEventsObject), options.policy);
  proc->reservations_ = std::make_shared<services::RemoteReservations>(
      central.with_object(services::kReservationsObject), options.policy);
  if (options.forward_logs) {
    proc->log_forwarder_ = std::make_shared<services::LogForwarder>(
        central.with_object(services::kLogObject), options.process, options.policy);
    std::weak_ptr<services::LogForwarder> weak = proc->log_forwarder_;
    log::set_forwarder([weak](log::Severity s, const std::string& text) {
      if (auto f = weak.lock()) f->forward(s, text);
    });
    proc->forwarding_ = true;
  }
  proc->manager_ = std::make_unique<sysman::LocalManager>(
      options.process, central.with_object(sysman::kSysmanObject), options.policy);
  try {
    proc->host_ = std::make_unique<Host>(HostOptions{proc->spec_.name, proc->spec_.endpoint.host,
                                                     proc->spec_.endpoint.port,
                                                     proc->spec_.worker_count});
    auto endpoint = fmt::format("{}:{}", proc->host_->advertised_host(), proc->host_->port());

    // (2) Announce.
    proc->manager_->report(sysman::ProcessState::kStarting,
                           {{"pid", static_cast<int>(::getpid())}, {"endpoint", endpoint}});

    // (3) Manifest.
    auto manifest = proc->registry_->manifest_for(options.process);

    auto& ctx = proc->context_;
    ctx.process = proc->spec_.name;
    ctx.host = proc->host_.get();
    ctx.resolver = proc->registry_;
    ctx.events = proc->events_;
    ctx.reservations = proc->reservations_;

    // (4) Local configurables first so devices can bind them, then devices.
    const auto& t = *proc->template_;
    for (auto scope : {Scope::kLocal, Scope::kDistributed}) {
      const auto& factory = scope == Scope::kLocal ? t.controllers : t.devices;
      for (const auto& object : manifest) {
        if (object.scope != scope) continue;
        auto made = factory.construct(object, ctx);
        proc->host_->add(made);
        proc->objects_.push_back(std::move(made));
      }
    }

    // (5) Publish distributed names.
    for (const auto& object : proc->objects_) {
      if (object->scope() != Scope::kDistributed) continue;
      proc->registry_->register_name(object->name(), proc->host_->ref_for(object->name()));
      proc->registered_.push_back(object->name());
    }

    // (6) Serve.
    proc->host_->start();
    for (const auto& object : proc->objects_) object->on_ready();
  } catch (const Error& e) {
    log::error("{}: boot failed: {}", options.process, e.what());
    try {
      proc->manager_->report(sysman::ProcessState::kFailed, {{"reason", e.what()}});
    } catch (const Error& report_error) {
      log::warning("{}: could not report failure: {}", options.process, report_error.what());
    }
    proc->stopped_ = true;
    proc->shutdown_objects();
    throw;
  }

  // (7) Ready.
  proc->manager_->report(sysman::ProcessState::kReady);
  proc->manager_->start_heartbeat(config.heartbeat_period);
  log::info("{}: ready on port {} with {} objects", options.process, proc->host_->port(),
            proc->objects_.size());
  return proc;
}

RunningProcess::~RunningProcess() {
  if (!stopped_) stop();
  if (forwarding_) {
    log::set_forwarder(nullptr);
    if (log_forwarder_) log_forwarder_->flush(Millis(500));
  }
}

void RunningProcess::shutdown_objects() {
  if (host_) host_->stop();
  for (auto it = objects_.rbegin(); it != objects_.rend(); ++it) {
    try {
      (*it)->on_shutdown();
    } catch (const std::exception& e) {
      log::warning("{}: {} shutdown: {}", spec_.name, (*it)->name(), e.what());
    }
  }
}

void RunningProcess::stop() {
  if (stopped_) return;
  stopped_ = true;
  if (manager_) manager_->stop_heartbeat();
  shutdown_objects();
  if (manager_) {
    try {
      manager_->report(sysman::ProcessState::kStopped);
    } catch (const Error& e) {
      log::warning("{}: could not report stop: {}", spec_.name, e.what());
    }
  }
  if (events_) events_->flush(Millis(500));
}

void RunningProcess::halt() {
  if (stopped_) return;
  stopped_ = true;
  if (manager_) manager_->stop_heartbeat();
  shutdown_objects();
}

}  // namespace iccs::kernel
