#include "iccs/facility/sim.hpp"

#include <chrono>

namespace iccs::facility {

SimWorld::SimWorld(Mode mode) : mode_(mode) {
  if (mode_ == Mode::kRealTime) thread_ = std::thread([this] { run(); });
}

SimWorld::~SimWorld() {
  {
    std::lock_guard lock(stop_mu_);
    stopping_ = true;
  }
  stop_cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

std::uint64_t SimWorld::join(Stage stage, Participant participant) {
  auto lock = this->lock();
  auto id = next_id_++;
  participants_.emplace(id, std::make_pair(stage, std::move(participant)));
  return id;
}

void SimWorld::leave(std::uint64_t id) {
  auto lock = this->lock();
  participants_.erase(id);
}

void SimWorld::advance(int ticks) {
  const double dt = std::chrono::duration<double>(kTick).count();
  for (int i = 0; i < ticks; ++i) {
    auto lock = this->lock();
    // Copy: a participant may leave while being stepped.
    auto snapshot = participants_;
    for (auto stage : {Stage::kControllers, Stage::kDevices}) {
      for (auto& [_, p] : snapshot) {
        if (p.first == stage) p.second(dt);
      }
    }
    ++ticks_;
  }
}

void SimWorld::run() {
  auto next = std::chrono::steady_clock::now();
  std::unique_lock lock(stop_mu_);
  while (!stopping_) {
    next += kTick;
    if (stop_cv_.wait_until(lock, next, [this] { return stopping_; })) break;
    lock.unlock();
    advance(1);
    lock.lock();
    // After a long stall, resume from now rather than replaying missed ticks.
    auto now = std::chrono::steady_clock::now();
    if (now - next > 10 * kTick) next = now;
  }
}

}  // namespace iccs::facility
