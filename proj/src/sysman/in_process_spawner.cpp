#include "iccs/sysman/in_process_spawner.hpp"

#include <signal.h>

#include "iccs/logging.hpp"

namespace iccs::sysman {

namespace {

constexpr int kExitFailure = 1 << 8;  // wait status of exit(1)
constexpr int kExitClean = 0;
constexpr int kKilled = SIGKILL;      // wait status of a SIGKILL death

}  // namespace

InProcessSpawner::InProcessSpawner(Launcher launcher) : launcher_(std::move(launcher)) {}

InProcessSpawner::~InProcessSpawner() { stop_all(); }

int InProcessSpawner::spawn(const registry::ProcessSpec& spec, const conduit::ObjectRef& registry) {
  auto slot = std::make_shared<Slot>();
  std::lock_guard lock(mu_);
  if (auto it = slots_.find(spec.name); it != slots_.end()) {
    auto& old = it->second;
    if (old->process && !old->process->stopped()) old->process->halt();
    retired_.push_back(old);
  }
  slot->handle = next_handle_++;
  slots_[spec.name] = slot;
  std::weak_ptr<Slot> weak = slot;
  slot->boot = std::thread([this, weak, spec, registry] {
    std::unique_ptr<kernel::RunningProcess> proc;
    try {
      proc = launcher_(spec, registry);
    } catch (const std::exception& e) {
      log::error("{}: launcher failed: {}", spec.name, e.what());
    }
    std::lock_guard lock(mu_);
    auto s = weak.lock();
    if (!s) return;
    if (!proc) {
      s->ended = true;
      s->status = kExitFailure;
      return;
    }
    proc->host().set_crash_handler([this, name = spec.name] { kill(name); });
    s->process = std::move(proc);
  });
  return slot->handle;
}

void InProcessSpawner::end(Slot& slot, int status) {
  slot.ended = true;
  slot.status = status;
}

void InProcessSpawner::terminate(const std::string& process) {
  std::lock_guard lock(mu_);
  auto it = slots_.find(process);
  if (it == slots_.end() || it->second->ended) return;
  auto slot = it->second;
  helpers_.emplace_back([this, slot] {
    if (slot->process) slot->process->stop();
    std::lock_guard lock(mu_);
    end(*slot, kExitClean);
  });
}

void InProcessSpawner::kill(const std::string& process) {
  std::lock_guard lock(mu_);
  auto it = slots_.find(process);
  if (it == slots_.end() || it->second->ended) return;
  auto slot = it->second;
  helpers_.emplace_back([this, slot] {
    if (slot->process) slot->process->halt();
    std::lock_guard lock(mu_);
    end(*slot, kKilled);
  });
}

std::vector<ChildExit> InProcessSpawner::reap() {
  std::lock_guard lock(mu_);
  std::vector<ChildExit> out;
  for (auto& [name, slot] : slots_) {
    if (slot->ended && !slot->reaped) {
      slot->reaped = true;
      out.push_back(ChildExit{name, slot->handle, slot->status});
    }
  }
  return out;
}

kernel::RunningProcess* InProcessSpawner::find(const std::string& process) {
  std::lock_guard lock(mu_);
  auto it = slots_.find(process);
  if (it == slots_.end() || it->second->ended) return nullptr;
  return it->second->process.get();
}

void InProcessSpawner::stop_all() {
  std::vector<std::shared_ptr<Slot>> slots;
  std::vector<std::thread> helpers;
  {
    std::lock_guard lock(mu_);
    for (auto& [_, s] : slots_) slots.push_back(s);
    for (auto& s : retired_) slots.push_back(s);
    slots_.clear();
    retired_.clear();
    helpers.swap(helpers_);
  }
  for (auto& s : slots) {
    if (s->boot.joinable()) s->boot.join();
  }
  for (auto& h : helpers) {
    if (h.joinable()) h.join();
  }
  // Later processes first, mirroring an orderly facility shutdown.
  for (auto it = slots.rbegin(); it != slots.rend(); ++it) {
    if ((*it)->process && !(*it)->process->stopped()) (*it)->process->halt();
  }
  slots.clear();
}

}  // namespace iccs::sysman
