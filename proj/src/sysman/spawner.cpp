#include "iccs/sysman/spawner.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "iccs/error.hpp"
#include "iccs/logging.hpp"

extern char** environ;

namespace iccs::sysman {

std::string describe_exit(int status) {
  if (WIFEXITED(status)) return fmt::format("exited with status {}", WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return fmt::format("killed by signal {}", WTERMSIG(status));
  return fmt::format("ended (wait status {})", status);
}

std::filesystem::path self_executable() { return std::filesystem::read_symlink("/proc/self/exe"); }

ExecSpawner::ExecSpawner(std::filesystem::path executable, std::filesystem::path config_file)
    : executable_(std::move(executable)), config_file_(std::move(config_file)) {}

ExecSpawner::~ExecSpawner() { kill_all(); }

int ExecSpawner::spawn(const registry::ProcessSpec& spec, const conduit::ObjectRef& registry) {
  std::vector<std::string> args = {executable_.string(),
                                   std::string(registry::to_string(spec.category)),
                                   "--name",
                                   spec.name,
                                   "--config",
                                   config_file_.string(),
                                   "--central",
                                   fmt::format("{}:{}", registry.host, registry.port)};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  // Children exit with the manager rather than lingering as orphans.
  std::vector<std::string> env_store;
  for (char** e = environ; *e; ++e) env_store.emplace_back(*e);
  env_store.emplace_back("ICCS_DIE_WITH_PARENT=1");
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  {
    // A relaunch replaces any previous instance outright.
    std::lock_guard lock(mu_);
    if (auto it = children_.find(spec.name); it != children_.end()) {
      ::kill(it->second, SIGKILL);
      int status = 0;
      ::waitpid(it->second, &status, 0);
      children_.erase(it);
    }
  }

  pid_t pid = 0;
  int rc = ::posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), envp.data());
  if (rc != 0) {
    throw Error(ErrorCode::kAppError,
                fmt::format("cannot spawn {}: {}", spec.name, std::strerror(rc)));
  }
  std::lock_guard lock(mu_);
  children_[spec.name] = pid;
  log::info("sysman: spawned {} as pid {}", spec.name, pid);
  return pid;
}

void ExecSpawner::terminate(const std::string& process) {
  std::lock_guard lock(mu_);
  auto it = children_.find(process);
  if (it != children_.end()) ::kill(it->second, SIGTERM);
}

std::vector<ChildExit> ExecSpawner::reap() {
  std::lock_guard lock(mu_);
  std::vector<ChildExit> out;
  for (auto it = children_.begin(); it != children_.end();) {
    int status = 0;
    pid_t r = ::waitpid(it->second, &status, WNOHANG);
    if (r == it->second || (r < 0 && errno == ECHILD)) {
      out.push_back(ChildExit{it->first, it->second, status});
      it = children_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

void ExecSpawner::kill_all() {
  std::lock_guard lock(mu_);
  for (const auto& [_, pid] : children_) ::kill(pid, SIGKILL);
  for (const auto& [_, pid] : children_) {
    int status = 0;
    ::waitpid(pid, &status, 0);
  }
  children_.clear();
}

}  // namespace iccs::sysman
