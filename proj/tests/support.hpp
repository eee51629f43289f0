#pragma once

// Shared helpers for the unit and acceptance suites.

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "iccs/conduit/client.hpp"

namespace iccs::testing {

/// In-memory name table standing in for the registry.
class MapResolver : public conduit::Resolver {
 public:
  void set(const std::string& name, conduit::ObjectRef ref) {
    std::lock_guard lock(mu_);
    table_[name] = std::move(ref);
    cv_.notify_all();
  }
  void erase(const std::string& name) {
    std::lock_guard lock(mu_);
    table_.erase(name);
  }
  conduit::ObjectRef resolve(const std::string& name) override {
    std::lock_guard lock(mu_);
    ++resolves;
    auto it = table_.find(name);
    if (it == table_.end()) throw Error(ErrorCode::kNoSuchObject, name);
    return it->second;
  }
  conduit::ObjectRef wait_for(const std::string& name, Millis timeout) override {
    std::unique_lock lock(mu_);
    ++resolves;
    if (!cv_.wait_for(lock, timeout, [&] { return table_.count(name) > 0; })) {
      throw Error(ErrorCode::kTimeout, name);
    }
    return table_.at(name);
  }

  int resolves = 0;

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, conduit::ObjectRef> table_;
};

/// Polls `pred` until true or the timeout elapses.
inline bool eventually(const std::function<bool()>& pred, Millis timeout = Millis(3000)) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(Millis(5));
  }
  return pred();
}

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected an iccs::Error");
}

}  // namespace iccs::testing
