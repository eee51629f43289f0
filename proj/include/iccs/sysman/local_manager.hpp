#pragma once

#include <condition_variable>
#include <mutex>
#include <string>
#include <thread>

#include "iccs/conduit/client.hpp"
#include "iccs/sysman/process_table.hpp"

namespace iccs::sysman {

inline constexpr const char* kSysmanObject = "__sysman";

/// In-process proxy for the central system manager: state reports and the
/// periodic `ready` heartbeat.
class LocalManager {
 public:
  LocalManager(std::string process, conduit::ObjectRef sysman, conduit::ConnectionPolicy policy);
  ~LocalManager();
  LocalManager(const LocalManager&) = delete;
  LocalManager& operator=(const LocalManager&) = delete;

  void report(ProcessState state, json info = json::object());
  void start_heartbeat(Millis period);
  void stop_heartbeat();

 private:
  std::string process_;
  conduit::Client client_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::thread heartbeat_;
};

}  // namespace iccs::sysman
