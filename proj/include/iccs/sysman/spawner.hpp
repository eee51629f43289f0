#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "iccs/conduit/object_ref.hpp"
#include "iccs/registry/config.hpp"

namespace iccs::sysman {

struct ChildExit {
  std::string process;
  int pid = 0;
  int status = 0;  // raw wait status
};

std::string describe_exit(int status);

/// How the system manager starts managed processes.
class Spawner {
 public:
  virtual ~Spawner() = default;
  /// Starts `spec` pointed at the central registry; returns its pid (or
  /// another positive handle).
  virtual int spawn(const registry::ProcessSpec& spec, const conduit::ObjectRef& registry) = 0;
  /// Asks a child to stop gracefully.
  virtual void terminate(const std::string& process) = 0;
  /// Children that have exited since the last call.
  virtual std::vector<ChildExit> reap() = 0;
};

/// Runs each process as `<exe> <category> --name <n> --config <file>
/// --central <host:port>`.
class ExecSpawner : public Spawner {
 public:
  ExecSpawner(std::filesystem::path executable, std::filesystem::path config_file);
  ~ExecSpawner() override;

  int spawn(const registry::ProcessSpec& spec, const conduit::ObjectRef& registry) override;
  void terminate(const std::string& process) override;
  std::vector<ChildExit> reap() override;

  /// SIGKILLs and reaps every child still running.
  void kill_all();

 private:
  std::filesystem::path executable_;
  std::filesystem::path config_file_;
  std::mutex mu_;
  std::map<std::string, int> children_;  // process -> pid
};

/// The running binary, for spawning children of the same executable.
std::filesystem::path self_executable();

}  // namespace iccs::sysman
