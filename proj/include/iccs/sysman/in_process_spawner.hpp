#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "iccs/kernel/boot.hpp"
#include "iccs/sysman/spawner.hpp"

namespace iccs::sysman {

/// Boots managed processes as threads of the calling process. Used by tests
/// and single-binary demos; `kill` stands in for an OS-level crash.
class InProcessSpawner : public Spawner {
 public:
  using Launcher = std::function<std::unique_ptr<kernel::RunningProcess>(
      const registry::ProcessSpec& spec, const conduit::ObjectRef& registry)>;

  explicit InProcessSpawner(Launcher launcher);
  ~InProcessSpawner() override;

  int spawn(const registry::ProcessSpec& spec, const conduit::ObjectRef& registry) override;
  void terminate(const std::string& process) override;
  std::vector<ChildExit> reap() override;

  /// Halts the process abruptly and reports it as killed by SIGKILL.
  void kill(const std::string& process);
  /// The booted process, or nullptr while booting or after it ended.
  kernel::RunningProcess* find(const std::string& process);
  /// Stops everything and joins all threads.
  void stop_all();

 private:
  struct Slot {
    int handle = 0;
    std::unique_ptr<kernel::RunningProcess> process;
    std::thread boot;
    bool ended = false;
    bool reaped = false;
    int status = 0;
  };
  void end(Slot& slot, int status);

  Launcher launcher_;
  std::mutex mu_;
  int next_handle_ = 1;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::vector<std::shared_ptr<Slot>> retired_;
  std::vector<std::thread> helpers_;
};

}  // namespace iccs::sysman
