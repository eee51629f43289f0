#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "iccs/conduit/client.hpp"
#include "iccs/conduit/server.hpp"
#include "iccs/kernel/configurable.hpp"
#include "iccs/kernel/dispatch_queue.hpp"

namespace iccs::kernel {

struct HostOptions {
  std::string process;
  std::string host = "127.0.0.1";  // bound and advertised in refs
  std::uint16_t port = 0;
  std::size_t workers = registry::kDefaultWorkerCount;
};

/// Name of the per-process fault injection object. It is dispatchable but
/// never placed in the name service.
inline constexpr const char* kFaultObject = "__fault";

/// The serving side of a process: listener, worker pool and object table.
/// Binds at construction; requests are served once start() is called.
class Host {
 public:
  explicit Host(HostOptions options);
  ~Host();

  Host(const Host&) = delete;
  Host& operator=(const Host&) = delete;

  const std::string& process() const { return options_.process; }
  const std::string& advertised_host() const { return options_.host; }
  std::uint16_t port() const { return server_.port(); }
  conduit::ObjectRef ref_for(const std::string& object) const;

  void add(std::shared_ptr<Configurable> object);  // BAD_ARGS on duplicate name
  bool remove(const std::string& name);
  std::shared_ptr<Configurable> find(std::string_view name) const;
  std::vector<std::shared_ptr<Configurable>> objects() const;

  void start();
  void stop();
  bool running() const { return running_; }

  DispatchQueue& queue() { return queue_; }
  conduit::Server& server() { return server_; }

  /// Incoming calls by method, excluding pings.
  const std::shared_ptr<conduit::CallStats>& incoming() const { return incoming_; }

  /// What "crash" does; the default terminates the OS process immediately.
  void set_crash_handler(std::function<void()> handler);
  void apply_fault(const json& fault);
  void clear_faults();

 private:
  void dispatch(conduit::Envelope call, conduit::Server::Responder respond);

  HostOptions options_;
  conduit::Server server_;
  DispatchQueue queue_;
  std::shared_ptr<conduit::CallStats> incoming_ = std::make_shared<conduit::CallStats>();
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Configurable>, std::less<>> objects_;
  std::function<void()> crash_handler_;
  std::vector<std::thread> deferred_;
  bool running_ = false;
};

}  // namespace iccs::kernel
