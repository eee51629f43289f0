// iccs: one binary for every facility role plus a few operator tools.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <sys/prctl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "iccs/conduit/client.hpp"
#include "iccs/facility/templates.hpp"
#include "iccs/gateway/gateway.hpp"
#include "iccs/kernel/boot.hpp"
#include "iccs/kernel/host.hpp"
#include "iccs/logging.hpp"
#include "iccs/registry/config.hpp"
#include "iccs/registry/registry_service.hpp"
#include "iccs/supervisory/director.hpp"
#include "iccs/sysman/local_manager.hpp"
#include "iccs/sysman/spawner.hpp"
#include "iccs/sysman/system_manager.hpp"

using namespace iccs;

namespace {

struct Globals {
  std::string config_file;
  std::string central;  // host:port
};

/// Termination signals are blocked in every thread and taken here.
sigset_t termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGHUP);
  return set;
}

int wait_for_signal() {
  auto set = termination_signals();
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

registry::Endpoint central_endpoint(const Globals& g) {
  if (!g.central.empty()) {
    auto colon = g.central.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kBadArgs, "--central must be host:port");
    int port = 0;
    try {
      port = std::stoi(g.central.substr(colon + 1));
    } catch (const std::exception&) {
      port = 0;
    }
    if (port < 1 || port > 65535) throw Error(ErrorCode::kBadArgs, "--central port must be 1-65535");
    return {g.central.substr(0, colon), static_cast<std::uint16_t>(port)};
  }
  if (!g.config_file.empty()) return registry::load_config(g.config_file).central;
  return registry::FacilityConfig{}.central;
}

conduit::ObjectRef central_ref(const Globals& g, const std::string& object) {
  auto ep = central_endpoint(g);
  return {ep.host, ep.port, "sysman", object};
}

conduit::ConnectionPolicy tool_policy() {
  conduit::ConnectionPolicy p;
  p.max_attempts = 2;
  p.call_timeout = Millis(5000);
  return p;
}

/// A global name, a central service (`__sysman`, `__events`, ...) or a full
/// ref:// text.
conduit::ObjectRef target_ref(const Globals& g, const std::string& target) {
  if (target.rfind("ref://", 0) == 0) return conduit::parse_ref(target);
  if (target.rfind("__", 0) == 0) return central_ref(g, target);
  registry::RegistryClient registry(central_ref(g, registry::kRegistryObject), tool_policy());
  return registry.resolve(target);
}

json parse_json_arg(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{} is not JSON: {}", what, e.what()));
  }
}

// --- roles ---

int run_sysman(const Globals& g, bool restart) {
  if (g.config_file.empty()) throw Error(ErrorCode::kBadArgs, "sysman needs --config");
  auto config = registry::load_config(g.config_file);
  sysman::SysmanOptions opts;
  opts.restart = restart;
  opts.spawner = std::make_shared<sysman::ExecSpawner>(sysman::self_executable(),
                                                       std::filesystem::absolute(g.config_file));
  if (!g.central.empty()) opts.port = central_endpoint(g).port;
  sysman::SystemManager manager(config, opts);
  log::set_process_name("sysman");
  auto& logs = manager.logs();
  log::set_forwarder([&logs](log::Severity s, const std::string& text) { logs.append("sysman", s, text); });
  manager.start();

  // A shutdown requested over the wire ends up as a signal to ourselves.
  std::thread waiter([&manager] {
    manager.wait_for_shutdown_request();
    ::kill(::getpid(), SIGTERM);
  });
  int status = 0;
  try {
    manager.launch();
    wait_for_signal();
  } catch (const Error& e) {
    log::error("sysman: {}", e.what());
    status = 1;
  }
  manager.shutdown();
  manager.stop_waiting();
  waiter.join();
  log::set_forwarder(nullptr);
  return status;
}

int run_process(const Globals& g, const std::string& name, std::optional<std::uint16_t> http_port) {
  auto world = std::make_shared<facility::SimWorld>(facility::SimWorld::Mode::kRealTime);
  auto templates = facility::demo_templates(world);
  templates["gateway"] = gateway::gateway_template(http_port);

  auto registry_ref = central_ref(g, registry::kRegistryObject);
  std::string template_name;
  if (!g.config_file.empty()) {
    auto config = registry::load_config(g.config_file);
    auto spec = config.find_process(name);
    if (!spec) throw Error(ErrorCode::kNoSuchObject, fmt::format("no process '{}' in config", name));
    template_name = spec->template_name;
  } else {
    registry::RegistryClient registry(registry_ref, tool_policy());
    auto config = registry.config();
    auto spec = config.find_process(name);
    if (!spec) throw Error(ErrorCode::kNoSuchObject, fmt::format("no process '{}' in config", name));
    template_name = spec->template_name;
  }
  auto it = templates.find(template_name);
  if (it == templates.end()) {
    throw Error(ErrorCode::kBadArgs, fmt::format("unknown template '{}'", template_name));
  }

  log::set_process_name(name);
  kernel::BootOptions opts;
  opts.process = name;
  opts.registry = registry_ref;
  opts.forward_logs = true;
  auto process = kernel::boot(it->second, opts);
  wait_for_signal();
  process->stop();
  return 0;
}

// --- tools ---

int run_ctl(const Globals& g, const std::string& target, const std::string& method, const std::string& args) {
  auto ref = target_ref(g, target);
  auto result = conduit::invoke(ref, method, parse_json_arg(args, "args"), tool_policy());
  std::cout << result.dump() << std::endl;
  return 0;
}

int run_inject(const Globals& g, const std::string& process, const std::string& fault) {
  auto result = conduit::invoke(central_ref(g, sysman::kSysmanObject), "inject",
                                {{"process", process}, {"fault", parse_json_arg(fault, "fault")}}, tool_policy());
  std::cout << result.dump() << std::endl;
  return 0;
}

/// Prints each status report it receives as one JSON line.
class Printer : public supervisory::Director {
 public:
  Printer() : Director("watch", kernel::Scope::kDistributed, "watch") {}
  std::atomic<int> printed{0};
  int limit = 0;

 protected:
  void on_report(const std::string& publisher, std::uint64_t monitor, std::uint64_t seq,
                 const statusmon::StatusReport& report) override {
    json line = statusmon::to_json(report);
    line["publisher"] = publisher;
    line["monitor"] = monitor;
    line["seq"] = seq;
    {
      std::lock_guard lock(out_mu_);
      std::cout << line.dump() << std::endl;
    }
    if (++printed == limit) ::kill(::getpid(), SIGTERM);
  }

 private:
  std::mutex out_mu_;
};

int run_watch(const Globals& g, const std::string& device, const std::string& field, double precision,
              int latency_ms, int count) {
  auto ref = target_ref(g, device);
  kernel::Host host({fmt::format("watch_{}", ::getpid()), "127.0.0.1", 0, 2});
  auto printer = std::make_shared<Printer>();
  printer->limit = count;
  host.add(printer);
  host.start();
  auto reply = conduit::invoke(ref, "begin_monitoring",
                               {{"field", field},
                                {"precision", precision},
                                {"latency_ms", latency_ms},
                                {"subscriber", conduit::format_ref(host.ref_for("watch"))}},
                               tool_policy());
  wait_for_signal();
  try {
    conduit::invoke(ref, "end_monitoring", {{"monitor", reply.at("monitor")}}, tool_policy());
  } catch (const Error& e) {
    log::warning("watch: end_monitoring: {}", e.what());
  }
  host.stop();
  return 0;
}

void fail(ErrorCode code, const std::string& message) {
  std::cerr << json{{"code", to_string(code)}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  if (std::getenv("ICCS_DIE_WITH_PARENT")) ::prctl(PR_SET_PDEATHSIG, SIGKILL);
  auto set = termination_signals();
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  CLI::App app{"Integrated control system: facility processes and operator tools"};
  app.require_subcommand(1);
  app.fallthrough();  // shared options may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_file, "Facility config file")->check(CLI::ExistingFile);
  app.add_option("--central", g.central, "Central process host:port (overrides the config)");

  bool restart = false;
  auto* sysman_cmd = app.add_subcommand("sysman", "Run the central process and launch the facility");
  sysman_cmd->add_flag("--restart", restart, "Relaunch failed processes");

  std::string name;
  int http = -1;
  auto* fep_cmd = app.add_subcommand("fep", "Run a front-end process");
  auto* sup_cmd = app.add_subcommand("supervisor", "Run a supervisor process");
  auto* gw_cmd = app.add_subcommand("gateway", "Run the console gateway");
  for (auto* cmd : {fep_cmd, sup_cmd, gw_cmd}) cmd->add_option("--name", name, "Process name")->required();
  gw_cmd->add_option("--http", http, "HTTP/WebSocket port")->check(CLI::Range(0, 65535));

  std::string target, method, args = "{}";
  auto* ctl_cmd = app.add_subcommand("ctl", "Invoke a method and print the result");
  ctl_cmd->add_option("ref", target, "Global name or ref://host:port/process/object")->required();
  ctl_cmd->add_option("method", method)->required();
  ctl_cmd->add_option("args", args, "JSON object");

  std::string field;
  double precision = 0.0;
  int latency = 100;
  int count = 0;
  auto* watch_cmd = app.add_subcommand("watch", "Print status reports as JSON lines");
  watch_cmd->add_option("device", target)->required();
  watch_cmd->add_option("field", field)->required();
  watch_cmd->add_option("--precision", precision)->check(CLI::NonNegativeNumber);
  watch_cmd->add_option("--latency", latency, "Milliseconds")->check(CLI::PositiveNumber);
  watch_cmd->add_option("--count", count, "Exit after this many reports");

  std::string process, fault;
  auto* inject_cmd = app.add_subcommand("inject", "Inject a fault into a managed process");
  inject_cmd->add_option("process", process)->required();
  inject_cmd->add_option("fault", fault, "JSON fault")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(ErrorCode::kBadArgs, e.what());
    return 1;
  }

  try {
    if (*sysman_cmd) return run_sysman(g, restart);
    if (*fep_cmd || *sup_cmd) return run_process(g, name, std::nullopt);
    if (*gw_cmd) {
      return run_process(g, name, http >= 0 ? std::optional<std::uint16_t>(http) : std::nullopt);
    }
    if (*ctl_cmd) return run_ctl(g, target, method, args);
    if (*watch_cmd) return run_watch(g, target, field, precision, latency, count);
    if (*inject_cmd) return run_inject(g, process, fault);
  } catch (const Error& e) {
    fail(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    fail(ErrorCode::kAppError, e.what());
    return 1;
  }
  return 1;
}
