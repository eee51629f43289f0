#include "iccs/kernel/dispatch_queue.hpp"

#include <algorithm>

#include "iccs/error.hpp"
#include "iccs/logging.hpp"

namespace iccs::kernel {

DispatchQueue::DispatchQueue(std::size_t workers) {
  if (workers < 1) throw Error(ErrorCode::kBadArgs, "worker_count must be >= 1");
  workers_.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

DispatchQueue::~DispatchQueue() { stop(); }

std::uint64_t DispatchQueue::submit(std::string key, bool serialize, Task task) {
  std::lock_guard lock(mu_);
  if (stopping_) return 0;
  std::uint64_t seq = next_seq_++;
  pending_.push_back(Entry{seq, std::move(key), serialize, std::move(task)});
  cv_.notify_all();
  return seq;
}

void DispatchQueue::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_ && workers_.empty()) return;
    stopping_ = true;
    pending_.clear();
    cv_.notify_all();
  }
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
  workers_.clear();
}

std::size_t DispatchQueue::max_concurrency() const {
  std::lock_guard lock(mu_);
  return max_active_;
}

std::size_t DispatchQueue::pending() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

void DispatchQueue::enable_trace(bool on) {
  std::lock_guard lock(mu_);
  trace_ = on;
  starts_.clear();
}

std::vector<std::uint64_t> DispatchQueue::start_trace() const {
  std::lock_guard lock(mu_);
  return starts_;
}

std::deque<DispatchQueue::Entry>::iterator DispatchQueue::next_runnable() {
  return std::find_if(pending_.begin(), pending_.end(),
                      [&](const Entry& e) { return !e.serialize || !busy_.count(e.key); });
}

void DispatchQueue::worker_loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return stopping_ || next_runnable() != pending_.end(); });
    if (stopping_) return;
    auto it = next_runnable();
    Entry entry = std::move(*it);
    pending_.erase(it);
    if (entry.serialize) busy_.insert(entry.key);
    ++active_;
    max_active_ = std::max(max_active_, active_);
    if (trace_) starts_.push_back(entry.seq);
    lock.unlock();

    try {
      entry.task();
    } catch (const std::exception& e) {
      log::error("dispatch: task for {} threw: {}", entry.key, e.what());
    }

    lock.lock();
    --active_;
    if (entry.serialize) busy_.erase(entry.key);
    cv_.notify_all();
  }
}

}  // namespace iccs::kernel
