#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace iccs::kernel {

/// Fixed worker pool with a FIFO pending list. At most `workers` tasks run at
/// once; a waiting task starts as soon as a slot frees, in arrival order.
/// Tasks submitted with `serialize` never overlap another task with the same
/// key; such a task is passed over (keeping its place) while its key is busy.
class DispatchQueue {
 public:
  using Task = std::function<void()>;

  explicit DispatchQueue(std::size_t workers);
  ~DispatchQueue();

  DispatchQueue(const DispatchQueue&) = delete;
  DispatchQueue& operator=(const DispatchQueue&) = delete;

  /// Returns the arrival sequence number assigned to the task.
  std::uint64_t submit(std::string key, bool serialize, Task task);
  /// Finishes running tasks, discards pending ones, joins workers.
  void stop();

  std::size_t workers() const { return workers_.size(); }
  std::size_t max_concurrency() const;
  std::size_t pending() const;

  /// Arrival sequence numbers in the order tasks began executing.
  void enable_trace(bool on);
  std::vector<std::uint64_t> start_trace() const;

 private:
  struct Entry {
    std::uint64_t seq;
    std::string key;
    bool serialize;
    Task task;
  };

  void worker_loop();
  std::deque<Entry>::iterator next_runnable();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Entry> pending_;
  std::set<std::string> busy_;
  std::uint64_t next_seq_ = 1;
  std::size_t active_ = 0;
  std::size_t max_active_ = 0;
  bool stopping_ = false;
  bool trace_ = false;
  std::vector<std::uint64_t> starts_;
  std::vector<std::thread> workers_;
};

}  // namespace iccs::kernel
