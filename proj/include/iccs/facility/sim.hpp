#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "iccs/value.hpp"

namespace iccs::facility {

/// Logical clock shared by the simulated hardware of one process. Each tick
/// steps every participant atomically: controllers first, then devices.
class SimWorld {
 public:
  static constexpr Millis kTick{10};

  enum class Mode { kRealTime, kManual };
  enum class Stage { kControllers, kDevices };

  /// Stepped with the tick length in seconds, under the world lock.
  using Participant = std::function<void(double dt)>;

  explicit SimWorld(Mode mode = Mode::kRealTime);
  ~SimWorld();
  SimWorld(const SimWorld&) = delete;
  SimWorld& operator=(const SimWorld&) = delete;

  std::uint64_t join(Stage stage, Participant participant);
  void leave(std::uint64_t id);

  /// Runs `ticks` ticks now. Works in either mode.
  void advance(int ticks = 1);
  std::uint64_t ticks() const { return ticks_.load(); }
  Mode mode() const { return mode_; }

  /// Every read or write of simulated state happens under this lock.
  std::unique_lock<std::recursive_mutex> lock() { return std::unique_lock(mu_); }

 private:
  void run();

  Mode mode_;
  std::recursive_mutex mu_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, std::pair<Stage, Participant>> participants_;
  std::atomic<std::uint64_t> ticks_{0};

  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace iccs::facility
