#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>

namespace iccs::kernel {

/// One thread draining a bounded FIFO of tasks. When full, the oldest task is
/// dropped to make room. Used for delivery paths that must never block the
/// producer and must preserve order.
class SerialWorker {
 public:
  using Task = std::function<void()>;

  explicit SerialWorker(std::size_t capacity = 1024);
  ~SerialWorker();

  SerialWorker(const SerialWorker&) = delete;
  SerialWorker& operator=(const SerialWorker&) = delete;

  /// Returns false when an older task had to be dropped.
  bool post(Task task);
  /// Waits until the queue is empty and no task is running.
  bool drain(std::chrono::milliseconds timeout);
  /// Discards pending tasks and joins; a running task is allowed to finish.
  void stop();

  std::size_t dropped() const;
  std::size_t size() const;

 private:
  void run();

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<Task> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::size_t dropped_ = 0;
  std::thread thread_;
};

}  // namespace iccs::kernel
