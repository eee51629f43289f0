#include "iccs/kernel/serial_worker.hpp"

#include "iccs/logging.hpp"

namespace iccs::kernel {

SerialWorker::SerialWorker(std::size_t capacity) : capacity_(capacity ? capacity : 1) {
  thread_ = std::thread([this] { run(); });
}

SerialWorker::~SerialWorker() { stop(); }

bool SerialWorker::post(Task task) {
  std::lock_guard lock(mu_);
  if (stopping_) return false;
  bool kept_all = true;
  if (queue_.size() >= capacity_) {
    queue_.pop_front();
    ++dropped_;
    kept_all = false;
  }
  queue_.push_back(std::move(task));
  cv_.notify_all();
  return kept_all;
}

bool SerialWorker::drain(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return idle_cv_.wait_for(lock, timeout, [&] { return queue_.empty() && !busy_; });
}

void SerialWorker::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    queue_.clear();
    cv_.notify_all();
  }
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
}

std::size_t SerialWorker::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::size_t SerialWorker::size() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void SerialWorker::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
    if (stopping_) break;
    Task task = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    lock.unlock();
    try {
      task();
    } catch (const std::exception& e) {
      log::warning("serial worker task failed: {}", e.what());
    }
    lock.lock();
    busy_ = false;
    if (queue_.empty()) idle_cv_.notify_all();
  }
  busy_ = false;
  idle_cv_.notify_all();
}

}  // namespace iccs::kernel
