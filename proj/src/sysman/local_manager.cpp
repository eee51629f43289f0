#include "iccs/sysman/local_manager.hpp"

#include "iccs/logging.hpp"

namespace iccs::sysman {

LocalManager::LocalManager(std::string process, conduit::ObjectRef sysman,
                           conduit::ConnectionPolicy policy)
    : process_(std::move(process)), client_(std::move(sysman), {policy, {}, {}}) {}

LocalManager::~LocalManager() { stop_heartbeat(); }

void LocalManager::report(ProcessState state, json info) {
  info["process"] = process_;
  info["state"] = to_string(state);
  client_.invoke("report", std::move(info));
}

void LocalManager::start_heartbeat(Millis period) {
  std::lock_guard lock(mu_);
  if (heartbeat_.joinable()) return;
  stopping_ = false;
  heartbeat_ = std::thread([this, period] {
    std::unique_lock lock(mu_);
    while (!cv_.wait_for(lock, period, [&] { return stopping_; })) {
      lock.unlock();
      try {
        report(ProcessState::kReady);
      } catch (const Error& e) {
        log::warning("{}: heartbeat failed: {}", process_, e.what());
      }
      lock.lock();
    }
  });
}

void LocalManager::stop_heartbeat() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (heartbeat_.joinable()) heartbeat_.join();
}

}  // namespace iccs::sysman
