#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "iccs/kernel/host.hpp"
#include "iccs/registry/config.hpp"
#include "iccs/registry/name_service.hpp"
#include "iccs/registry/registry_service.hpp"
#include "support.hpp"

using namespace iccs;
using namespace iccs::registry;
using iccs::testing::error_of;

namespace {

json minimal_process(std::string name, std::string category) {
  return {{"name", std::move(name)}, {"category", std::move(category)}, {"objects", json::array()}};
}

json fep_with(json objects) {
  return {{"processes", {{{"name", "fep_a"}, {"category", "fep"}, {"objects", std::move(objects)}}}}};
}

std::string error_message(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadArgs);
    return e.what();
  }
  FAIL("config unexpectedly accepted");
  return {};
}

conduit::ObjectRef ref(std::uint16_t port, std::string process, std::string object) {
  return {"127.0.0.1", port, std::move(process), std::move(object)};
}

}  // namespace

TEST_CASE("demo facility fixture loads with processes in file order") {
  auto config = load_config(ICCS_FIXTURE_DIR "/demo_facility.json");
  REQUIRE(config.processes.size() == 4);
  CHECK(config.processes[0].name == "fep_align1");
  CHECK(config.processes[1].name == "fep_diag1");
  CHECK(config.processes[2].name == "sup_align");
  CHECK(config.processes[3].name == "gw");
  CHECK(config.processes[0].category == Category::kFep);
  CHECK(config.processes[2].category == Category::kSupervisor);
  CHECK(config.processes[3].category == Category::kGateway);
}

TEST_CASE("worker_count defaults to four") {
  auto config = parse_config({{"processes", {minimal_process("p", "fep")}}});
  CHECK(config.processes[0].worker_count == 4);
}

TEST_CASE("validation names the violated rule") {
  CHECK(error_message({{"processes", {minimal_process("a", "fep"), minimal_process("a", "supervisor")}}})
            .find("duplicate process") != std::string::npos);

  CHECK(error_message(fep_with({{{"name", "act"}, {"type_tag", "actuator"},
                                 {"params", {{"controllers", {"ax9"}}}}}}))
            .find("binds missing controller") != std::string::npos);

  CHECK(error_message(fep_with({{{"name", "x"}, {"type_tag", "t"}}, {{"name", "x"}, {"type_tag", "t"}}}))
            .find("duplicate object") != std::string::npos);

  json dup_endpoint = {{"processes",
                        {{{"name", "a"}, {"category", "fep"}, {"endpoint", {{"port", 7100}}}},
                         {{"name", "b"}, {"category", "fep"}, {"endpoint", {{"port", 7100}}}}}}};
  CHECK(error_message(dup_endpoint).find("duplicate endpoint") != std::string::npos);
}

TEST_CASE("controller bindings must be local objects of the same process") {
  json doc = {{"processes",
               {{{"name", "a"}, {"category", "fep"},
                 {"objects", {{{"name", "ax1"}, {"scope", "local"}, {"type_tag", "axis_controller"}}}}},
                {{"name", "b"}, {"category", "fep"},
                 {"objects", {{{"name", "act"}, {"type_tag", "actuator"},
                               {"params", {{"controllers", {"ax1"}}}}}}}}}}};
  CHECK(error_message(doc).find("binds missing controller") != std::string::npos);
}

TEST_CASE("malformed corpus always yields BAD_ARGS") {
  std::vector<json> corpus;
  for (const char* text : {
           R"([])",
           R"({})",
           R"({"processes": 3})",
           R"({"processes": [1]})",
           R"({"processes": [{"category": "fep"}]})",
           R"({"processes": [{"name": "bad name", "category": "fep"}]})",
           R"({"processes": [{"name": "a", "category": "robot"}]})",
           R"({"processes": [{"name": "a", "category": "fep", "worker_count": 0}]})",
           R"({"processes": [{"name": "a", "category": "fep", "worker_count": "four"}]})",
           R"({"processes": [{"name": "a", "category": "fep", "endpoint": {"port": 70000}}]})",
           R"({"processes": [{"name": "a", "category": "fep", "objects": [{"name": "o"}]}]})",
           R"({"processes": [{"name": "a", "category": "fep", "objects": 7}]})",
           R"({"heartbeat_ms": 0, "processes": []})",
           R"({"missed_limit": "x", "processes": []})",
       }) {
    corpus.push_back(json::parse(text));
  }
  corpus.push_back(fep_with(json::parse(R"([{"name": "o", "type_tag": "t", "scope": "global"}])")));
  corpus.push_back(fep_with(json::parse(R"([{"name": "o", "type_tag": "t", "params": 5}])")));
  corpus.push_back(
      fep_with(json::parse(R"([{"name": "o", "type_tag": "t", "params": {"controllers": "ax1"}}])")));
  for (const auto& doc : corpus) {
    CAPTURE(doc.dump());
    CHECK(error_of([&] { parse_config(doc); }) == ErrorCode::kBadArgs);
  }

  auto path = std::filesystem::temp_directory_path() / "iccs_not_json.json";
  std::ofstream(path) << "{ processes: ";
  CHECK(error_of([&] { load_config(path); }) == ErrorCode::kBadArgs);
  CHECK(error_of([&] { load_config("/nonexistent/facility.json"); }) == ErrorCode::kBadArgs);
}

TEST_CASE("config survives a JSON round trip") {
  auto config = load_config(ICCS_FIXTURE_DIR "/demo_facility.json");
  auto again = parse_config(to_json(config));
  CHECK(to_json(again) == to_json(config));
}

TEST_CASE("name service register, replace and resolve") {
  NameService names;
  CHECK(error_of([&] { names.resolve("nobody"); }) == ErrorCode::kNoSuchObject);
  names.register_name("dev", ref(7001, "p", "dev"));
  CHECK(names.resolve("dev") == ref(7001, "p", "dev"));
  names.register_name("dev", ref(7002, "p", "dev"));
  CHECK(names.resolve("dev") == ref(7002, "p", "dev"));
  CHECK(names.entries().size() == 1);

  for (int i = 0; i < 100; ++i) {
    names.register_name("n" + std::to_string(i), ref(static_cast<std::uint16_t>(8000 + i), "p", "x"));
  }
  for (int i = 0; i < 100; ++i) {
    CHECK(names.resolve("n" + std::to_string(i)).port == 8000 + i);
  }
}

TEST_CASE("wait_for returns on registration and times out otherwise") {
  NameService names;
  names.register_name("early", ref(7001, "p", "early"));
  CHECK(names.wait_for("early", Millis(10)).object == "early");

  auto start = std::chrono::steady_clock::now();
  std::thread later([&] {
    std::this_thread::sleep_for(Millis(200));
    names.register_name("late", ref(7002, "p", "late"));
  });
  auto got = names.wait_for("late", Millis(2000));
  auto elapsed = std::chrono::steady_clock::now() - start;
  later.join();
  CHECK(got.port == 7002);
  CHECK(elapsed >= Millis(200));

  start = std::chrono::steady_clock::now();
  CHECK(error_of([&] { names.wait_for("never", Millis(150)); }) == ErrorCode::kTimeout);
  elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed >= Millis(150));
  CHECK(elapsed < Millis(400));
}

TEST_CASE("remove_process drops only that process's names") {
  NameService names;
  names.register_name("a1", ref(7001, "fep_a", "a1"));
  names.register_name("a2", ref(7001, "fep_a", "a2"));
  names.register_name("b1", ref(7002, "fep_b", "b1"));
  CHECK(names.remove_process("fep_a") == 2);
  CHECK(error_of([&] { names.resolve("a1"); }) == ErrorCode::kNoSuchObject);
  CHECK(names.resolve("b1").process == "fep_b");
}

TEST_CASE("registry service over the wire") {
  auto config = load_config(ICCS_FIXTURE_DIR "/demo_facility.json");
  auto names = std::make_shared<NameService>();
  kernel::Host host({"sysman", "127.0.0.1", 0, 8});
  host.add(std::make_shared<RegistryService>(names, config));
  host.start();

  RegistryClient client(host.ref_for(kRegistryObject));
  auto target = ref(7001, "fep_align1", "actuator_A");
  client.register_name("actuator_A", target);
  CHECK(client.resolve("actuator_A") == target);
  CHECK(error_of([&] { client.resolve("nothing"); }) == ErrorCode::kNoSuchObject);

  SUBCASE("local names are refused") {
    CHECK(error_of([&] { client.register_name("ax1", ref(7001, "fep_align1", "ax1")); }) ==
          ErrorCode::kBadArgs);
    CHECK(error_of([&] { client.resolve("ax1"); }) == ErrorCode::kNoSuchObject);
  }

  SUBCASE("manifests follow declaration order") {
    auto fep = client.manifest_for("fep_align1");
    std::vector<std::string> order;
    for (const auto& o : fep) order.push_back(o.name);
    CHECK(order == std::vector<std::string>{"ax1", "ax2", "ax3", "ax4", "actuator_A", "actuator_B"});

    auto sup = client.manifest_for("sup_align");
    REQUIRE(!sup.empty());
    for (const auto& o : sup) CHECK(o.scope == Scope::kDistributed);
    CHECK(error_of([&] { client.manifest_for("nope"); }) == ErrorCode::kNoSuchObject);
  }

  SUBCASE("wait_for over the wire") {
    std::thread later([&] {
      std::this_thread::sleep_for(Millis(150));
      names->register_name("sensor_1", ref(7003, "fep_diag1", "sensor_1"));
    });
    CHECK(client.wait_for("sensor_1", Millis(2000)).port == 7003);
    later.join();
    CHECK(error_of([&] { client.wait_for("ghost", Millis(100)); }) == ErrorCode::kTimeout);
  }

  SUBCASE("config is served") { CHECK(client.config().processes.size() == 4); }
}
