#include <doctest.h>

#include <set>
#include <thread>

#include "iccs/kernel/boot.hpp"
#include "iccs/registry/registry_service.hpp"
#include "iccs/sysman/in_process_spawner.hpp"
#include "iccs/sysman/local_manager.hpp"
#include "iccs/sysman/process_table.hpp"
#include "iccs/sysman/system_manager.hpp"
#include "support.hpp"

using namespace iccs;
using namespace iccs::sysman;
using iccs::testing::error_of;
using iccs::testing::eventually;
using registry::Category;

namespace {

class Part : public kernel::Configurable {
 public:
  explicit Part(const registry::ObjectSpec& s) : Configurable(s.name, s.scope, s.type_tag) {}
};

class Widget : public kernel::Configurable {
 public:
  explicit Widget(const registry::ObjectSpec& s) : Configurable(s.name, s.scope, s.type_tag) {
    expose("echo", [](const json& a) { return a; });
  }
};

std::shared_ptr<kernel::ProcessTemplate> basic_template() {
  auto t = std::make_shared<kernel::ProcessTemplate>();
  t->name = "basic";
  t->controllers.register_type("part", [](const registry::ObjectSpec& s, kernel::ProcessContext&) {
    return std::make_shared<Part>(s);
  });
  t->devices.register_type("widget", [](const registry::ObjectSpec& s, kernel::ProcessContext&) {
    return std::make_shared<Widget>(s);
  });
  return t;
}

json process_json(const std::string& name, const std::string& category, json objects) {
  return {{"name", name}, {"category", category}, {"objects", std::move(objects)}};
}

json widget(const std::string& name) { return {{"name", name}, {"type_tag", "widget"}}; }

registry::FacilityConfig small_facility(json fep_a_objects = nullptr) {
  if (fep_a_objects.is_null()) {
    fep_a_objects = {{{"name", "pa"}, {"scope", "local"}, {"type_tag", "part"}}, widget("wa")};
  }
  json doc = {{"heartbeat_ms", 100},
              {"missed_limit", 3},
              {"central", {{"host", "127.0.0.1"}, {"port", 0}}},
              {"processes",
               {process_json("fep_a", "fep", fep_a_objects),
                process_json("fep_b", "fep", {widget("wb")}),
                process_json("sup", "supervisor", {widget("ws")}),
                process_json("gw", "gateway", {widget("wg")})}}};
  return registry::parse_config(doc);
}

// A system manager whose processes boot as threads of the test binary.
struct Facility {
  explicit Facility(registry::FacilityConfig config, bool restart = false) {
    auto tmpl = basic_template();
    spawner = std::make_shared<InProcessSpawner>(
        [tmpl](const registry::ProcessSpec& spec, const conduit::ObjectRef& registry) {
          kernel::BootOptions opts;
          opts.process = spec.name;
          opts.registry = registry;
          return kernel::boot(tmpl, opts);
        });
    SysmanOptions opts;
    opts.spawner = spawner;
    opts.restart = restart;
    opts.phase_timeout = Millis(5000);
    manager = std::make_unique<SystemManager>(std::move(config), opts);
    manager->start();
  }
  ~Facility() {
    spawner->stop_all();
    manager.reset();
  }
  std::vector<services::Alert> failure_alerts() {
    std::vector<services::Alert> out;
    for (const auto& a : manager->events().alerts()) {
      if (a.event.name == "process_failed") out.push_back(a);
    }
    return out;
  }

  std::shared_ptr<InProcessSpawner> spawner;
  std::unique_ptr<SystemManager> manager;
};

}  // namespace

TEST_CASE("plan: three phases in config order") {
  auto p = plan(small_facility());
  CHECK(p.phases == std::vector<std::vector<std::string>>{{"fep_a", "fep_b"}, {"sup"}, {"gw"}});

  json doc = {{"processes", {process_json("g", "gateway", json::array()),
                             process_json("f2", "fep", json::array()),
                             process_json("f1", "fep", json::array())}}};
  auto q = plan(registry::parse_config(doc));
  REQUIRE(q.phases.size() == 3);
  CHECK(q.phases[0] == std::vector<std::string>{"f2", "f1"});
  CHECK(q.phases[1].empty());
  CHECK(q.phases[2] == std::vector<std::string>{"g"});
}

TEST_CASE("process table transitions") {
  ProcessTable table(small_facility());
  std::vector<std::string> seen;
  table.set_observer([&](const Transition& t) {
    seen.push_back(t.process + ":" + std::string(to_string(t.to)));
  });
  table.report("fep_a", ProcessState::kStarting);
  table.report("fep_a", ProcessState::kReady);
  table.report("fep_a", ProcessState::kReady);  // heartbeat
  CHECK(error_of([&] { table.report("fep_a", ProcessState::kStarting); }) == ErrorCode::kBadArgs);
  CHECK(error_of([&] { table.report("nobody", ProcessState::kStarting); }) == ErrorCode::kNoSuchObject);
  CHECK(error_of([&] { table.report("fep_b", ProcessState::kReady); }) == ErrorCode::kBadArgs);
  CHECK(table.fail("fep_a", "test"));
  CHECK_FALSE(table.fail("fep_a", "again"));
  CHECK(error_of([&] { table.report("fep_a", ProcessState::kReady); }) == ErrorCode::kBadArgs);
  table.relaunch("fep_a");
  CHECK(table.get("fep_a").state == ProcessState::kPending);
  CHECK(seen == std::vector<std::string>{"fep_a:starting", "fep_a:ready", "fep_a:failed",
                                         "fep_a:pending"});
}

TEST_CASE("launch respects the phase barrier and registers only distributed names") {
  Facility f(small_facility());
  f.manager->launch();

  for (const auto& r : f.manager->table().snapshot()) CHECK(r.state == ProcessState::kReady);
  std::vector<std::string> order;
  for (const auto& e : f.manager->events().query(std::string("process_state"))) {
    order.push_back(e.payload["process"].get<std::string>() + ":" +
                    e.payload["to"].get<std::string>());
  }
  auto pos = [&](const std::string& s) {
    return std::find(order.begin(), order.end(), s) - order.begin();
  };
  CHECK(pos("fep_a:ready") < pos("sup:starting"));
  CHECK(pos("fep_b:ready") < pos("sup:starting"));
  CHECK(pos("sup:ready") < pos("gw:starting"));
  CHECK(pos("gw:ready") < static_cast<long>(order.size()));

  std::set<std::string> names;
  for (const auto& e : f.manager->names().entries()) names.insert(e.object);
  CHECK(names == std::set<std::string>{"wa", "wb", "ws", "wg"});

  auto ref = f.manager->names().resolve("wa");
  CHECK(conduit::invoke(ref, "echo", {{"x", 1}}, {}) == json{{"x", 1}});
  CHECK(error_of([&] { conduit::invoke(ref.with_object("pa"), "echo", {}, {}); }) ==
        ErrorCode::kNoSuchObject);

  std::this_thread::sleep_for(Millis(600));
  CHECK(f.failure_alerts().empty());
}

TEST_CASE("a boot failure halts launch before the next phase") {
  Facility f(small_facility({{{"name", "fx"}, {"type_tag", "frobnicator"}}}));
  CHECK(error_of([&] { f.manager->launch(); }) == ErrorCode::kAppError);
  CHECK(f.manager->table().get("fep_a").state == ProcessState::kFailed);
  CHECK(f.manager->table().get("sup").state == ProcessState::kPending);
  CHECK(f.manager->table().get("gw").state == ProcessState::kPending);
  CHECK(f.failure_alerts().size() == 1);
}

TEST_CASE("killed process is detected, alerted once and unregistered") {
  Facility f(small_facility());
  f.manager->launch();
  auto start = std::chrono::steady_clock::now();
  f.spawner->kill("fep_b");
  REQUIRE(eventually([&] { return !f.failure_alerts().empty(); }, Millis(2000)));
  auto latency = std::chrono::steady_clock::now() - start;
  CHECK(latency <= Millis(500));
  CHECK(f.manager->table().get("fep_b").state == ProcessState::kFailed);
  CHECK(error_of([&] { f.manager->names().resolve("wb"); }) == ErrorCode::kNoSuchObject);
  std::this_thread::sleep_for(Millis(300));
  CHECK(f.failure_alerts().size() == 1);
  CHECK(f.manager->table().get("fep_a").state == ProcessState::kReady);
}

TEST_CASE("a silent process is failed after missed heartbeats") {
  Facility f(small_facility());
  f.manager->launch();
  auto start = std::chrono::steady_clock::now();
  f.spawner->find("sup")->halt();  // no exit seen, heartbeats simply stop
  REQUIRE(eventually([&] { return !f.failure_alerts().empty(); }, Millis(2000)));
  auto latency = std::chrono::steady_clock::now() - start;
  CHECK(latency <= Millis(500));
  CHECK(f.failure_alerts()[0].event.payload["reason"] == "missed heartbeats");
}

TEST_CASE("graceful shutdown ends in stopped without alerts") {
  Facility f(small_facility());
  f.manager->launch();
  f.manager->shutdown();
  REQUIRE(eventually([&] {
    for (const auto& r : f.manager->table().snapshot()) {
      if (r.state != ProcessState::kStopped) return false;
    }
    return f.spawner->reap().size() == 0 || true;
  }));
  std::this_thread::sleep_for(Millis(300));
  CHECK(f.failure_alerts().empty());
  CHECK(f.manager->names().entries().empty());
}

TEST_CASE("restart relaunches a failed process and republishes its names") {
  Facility f(small_facility(), true);
  f.manager->launch();
  auto old_ref = f.manager->names().resolve("wb");
  f.spawner->kill("fep_b");
  REQUIRE(eventually([&] { return !f.failure_alerts().empty(); }));
  REQUIRE(eventually([&] {
    return f.manager->table().get("fep_b").state == ProcessState::kReady;
  }, Millis(5000)));
  auto new_ref = f.manager->names().resolve("wb");
  CHECK(new_ref.port != old_ref.port);
  CHECK(conduit::invoke(new_ref, "echo", 5, {}) == 5);
}

TEST_CASE("sysman object over the wire") {
  Facility f(small_facility());
  f.manager->launch();
  auto sysref = f.manager->ref_for(kSysmanObject);
  conduit::ConnectionPolicy policy;
  auto states = conduit::invoke(sysref, "query_states", {}, policy);
  REQUIRE(states.size() == 4);
  CHECK(states[0]["state"] == "ready");
  CHECK(conduit::invoke(sysref, "plan", {}, policy)[0] == json{"fep_a", "fep_b"});
  CHECK(error_of([&] {
          conduit::invoke(sysref, "report", {{"process", "ghost"}, {"state", "ready"}}, policy);
        }) == ErrorCode::kNoSuchObject);
  CHECK(error_of([&] {
          conduit::invoke(sysref, "inject", {{"process", "ghost"}, {"fault", json::object()}}, policy);
        }) == ErrorCode::kNoSuchObject);

  // A reply delay longer than the client's timeout surfaces as TIMEOUT.
  conduit::invoke(sysref, "inject", {{"process", "fep_a"}, {"fault", {{"reply_delay_ms", 400}}}}, policy);
  conduit::ConnectionPolicy quick;
  quick.call_timeout = Millis(150);
  auto wa = f.manager->names().resolve("wa");
  CHECK(error_of([&] { conduit::invoke(wa, "echo", 1, quick); }) == ErrorCode::kTimeout);
  conduit::invoke(sysref, "inject", {{"process", "fep_a"}, {"fault", {{"reply_delay_ms", 0}}}}, policy);
  std::this_thread::sleep_for(Millis(400));  // the delayed reply still holds the widget
  CHECK(conduit::invoke(wa, "echo", 2, quick) == 2);

  // A crash fault becomes a failure alert.
  conduit::invoke(sysref, "inject", {{"process", "fep_a"}, {"fault", {{"crash", true}}}}, policy);
  REQUIRE(eventually([&] { return !f.failure_alerts().empty(); }));
  CHECK(f.failure_alerts()[0].event.payload["process"] == "fep_a");
}
