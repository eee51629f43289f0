#include <doctest.h>

#include <cmath>
#include <set>

#include "demo_facility.hpp"
#include "iccs/facility/alignment.hpp"
#include "iccs/facility/devices.hpp"
#include "iccs/kernel/host.hpp"
#include "iccs/services/stores.hpp"
#include "support.hpp"

using namespace iccs;
using namespace iccs::facility;
using iccs::testing::DemoFacility;
using iccs::testing::DemoOptions;
using iccs::testing::error_of;
using iccs::testing::eventually;

namespace {

registry::ObjectSpec local(const std::string& name, const std::string& tag, json params = json::object()) {
  return {name, registry::Scope::kLocal, tag, std::move(params)};
}
registry::ObjectSpec distributed(const std::string& name, const std::string& tag, json params) {
  return {name, registry::Scope::kDistributed, tag, std::move(params)};
}

// One FEP's worth of simulated hardware on a manual clock, without sysman.
struct Bench {
  explicit Bench(int axes = 4) {
    ctx.process = "bench";
    ctx.host = &host;
    ctx.events = events;
    ctx.reservations = reservations;
    std::vector<std::string> names;
    for (int i = 0; i < axes; ++i) {
      auto n = "ax" + std::to_string(i);
      auto axis = std::make_shared<AxisController>(
          local(n, "axis_controller", {{"position", 0.0}, {"velocity", 5.0}, {"limits", {-10, 10}}}), world);
      host.add(axis);
      controllers.push_back(axis);
      names.push_back(n);
    }
    auto dio = std::make_shared<DioController>(local("dio", "dio_channel"));
    host.add(dio);
    actuator = std::make_shared<Actuator>(distributed("act", "actuator", {{"controllers", names}}), ctx, world);
    host.add(actuator);
    shutter = std::make_shared<Shutter>(
        distributed("shut", "shutter", {{"controllers", {"dio"}}, {"transit_ms", 50}, {"initial", "closed"}}),
        ctx, world);
    host.add(shutter);
    host.start();
  }
  ~Bench() {
    actuator->on_shutdown();
    shutter->on_shutdown();
  }

  std::shared_ptr<SimWorld> world = std::make_shared<SimWorld>(SimWorld::Mode::kManual);
  kernel::Host host{{"bench", "127.0.0.1", 0, 4}};
  std::shared_ptr<services::EventStore> events = std::make_shared<services::EventStore>();
  std::shared_ptr<services::ReservationTable> reservations = std::make_shared<services::ReservationTable>();
  kernel::ProcessContext ctx;
  std::vector<std::shared_ptr<AxisController>> controllers;
  std::shared_ptr<Actuator> actuator;
  std::shared_ptr<Shutter> shutter;
};

// Straight from the model definition, without the device code.
double expected_signal(const std::vector<double>& offsets, double sigma) {
  double s = 0;
  for (double o : offsets) s += o * o;
  return std::exp(-s / (sigma * sigma));
}

}  // namespace

TEST_CASE("axis integrates toward its target within velocity per tick") {
  auto world = std::make_shared<SimWorld>(SimWorld::Mode::kManual);
  AxisController ax(local("ax", "axis_controller", {{"position", 0.5}, {"velocity", 5.0}}), world);
  {
    auto lock = world->lock();
    ax.command(-0.73);
  }
  double bound = 5.0 * 0.010 + 1e-12;
  int ticks = 0;
  while (ax.moving() && ticks < 1000) {
    double before = ax.position();
    world->advance();
    CHECK(std::fabs(ax.position() - before) <= bound);
    CHECK(ax.within_limits(ax.position()));
    ++ticks;
  }
  CHECK(ax.position() == -0.73);
  CHECK(ticks == static_cast<int>(std::ceil(1.23 / 0.05)));
  CHECK(error_of([&] { ax.command(10.5); }) == ErrorCode::kOutOfRange);
  CHECK(ax.target() == -0.73);
}

TEST_CASE("axis controller rejects bad parameters") {
  auto world = std::make_shared<SimWorld>(SimWorld::Mode::kManual);
  CHECK(error_of([&] { AxisController(local("a", "axis_controller", {{"velocity", 0}}), world); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([&] { AxisController(local("a", "axis_controller", {{"limits", {1, -1}}}), world); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([&] { AxisController(local("a", "axis_controller", {{"position", 11}}), world); }) ==
        ErrorCode::kBadArgs);
}

TEST_CASE("four-axis move settles exactly through four controllers") {
  Bench bench;
  auto token = bench.reservations->reserve("act", "op").token;
  std::vector<double> targets = {1.0, -2.5, 0.3, 9.99};
  bench.actuator->move_to(targets, token);
  CHECK(bench.actuator->state().moving);
  bench.world->advance(1000);
  auto s = bench.actuator->state();
  CHECK_FALSE(s.moving);
  CHECK(s.moves_completed == 1);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(s.positions[i] - targets[i]) <= 1e-6);
  int exercised = 0;
  for (auto& c : bench.controllers) exercised += c->commands() == 1 ? 1 : 0;
  CHECK(exercised == 4);

  auto events = bench.events->query("move_complete");
  REQUIRE(events.size() == 1);
  CHECK(events[0].payload["positions"] == json(targets));
}

TEST_CASE("move_to precondition order: reservation, arity, range") {
  Bench bench;
  CHECK(error_of([&] { bench.actuator->move_to({1, 2}, ""); }) == ErrorCode::kReserved);
  auto token = bench.reservations->reserve("act", "op").token;
  auto other = bench.reservations->reserve("shut", "op").token;
  CHECK(error_of([&] { bench.actuator->move_to({1, 2, 3, 4}, other); }) == ErrorCode::kReserved);
  CHECK(error_of([&] { bench.actuator->move_to({1, 2}, token); }) == ErrorCode::kBadArgs);
  CHECK(error_of([&] { bench.actuator->move_to({1, 2, 3, 10.5}, token); }) == ErrorCode::kOutOfRange);
  bench.world->advance(10);
  auto s = bench.actuator->state();
  CHECK(s.targets == std::vector<double>{0, 0, 0, 0});
  CHECK(s.positions == std::vector<double>{0, 0, 0, 0});
  for (auto& c : bench.controllers) CHECK(c->commands() == 0);
}

TEST_CASE("move_to over the wire relays error codes") {
  Bench bench;
  conduit::ConnectionPolicy policy;
  auto ref = bench.host.ref_for("act");
  CHECK(error_of([&] { conduit::invoke(ref, "move_to", {{"targets", {1, 1, 1, 1}}}, policy); }) ==
        ErrorCode::kReserved);
  auto token = bench.reservations->reserve("act", "op").token;
  auto reply = conduit::invoke(ref, "move_to", {{"targets", {1, 1, 1, 1}}, {"token", token}}, policy);
  CHECK(reply["accepted"] == true);
  CHECK(error_of([&] { conduit::invoke(bench.host.ref_for("ax0"), "command", {}, policy); }) ==
        ErrorCode::kNoSuchObject);
}

TEST_CASE("actuator binds one to four axes") {
  auto world = std::make_shared<SimWorld>(SimWorld::Mode::kManual);
  kernel::Host host({"h", "127.0.0.1", 0, 4});
  kernel::ProcessContext ctx;
  ctx.host = &host;
  std::vector<std::string> names;
  for (int i = 0; i < 5; ++i) {
    names.push_back("a" + std::to_string(i));
    host.add(std::make_shared<AxisController>(local(names.back(), "axis_controller"), world));
  }
  CHECK(error_of([&] { Actuator(distributed("x", "actuator", {{"controllers", json::array()}}), ctx, world); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([&] { Actuator(distributed("x", "actuator", {{"controllers", names}}), ctx, world); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([&] { Actuator(distributed("x", "actuator", {{"controllers", {"nope"}}}), ctx, world); }) ==
        ErrorCode::kBadArgs);
}

TEST_CASE("shutter transit takes its configured time and rejects commands meanwhile") {
  Bench bench;
  CHECK(bench.shutter->state() == ShutterState::kClosed);
  bench.shutter->open();
  CHECK(bench.shutter->state() == ShutterState::kTransit);
  CHECK(error_of([&] { bench.shutter->close(); }) == ErrorCode::kAppError);
  bench.world->advance(4);
  CHECK(bench.shutter->state() == ShutterState::kTransit);
  bench.world->advance(1);
  CHECK(bench.shutter->state() == ShutterState::kOpen);
  bench.shutter->open();  // already open
  CHECK(bench.shutter->state() == ShutterState::kOpen);
  CHECK(bench.events->query("shutter_state").size() == 1);
}

TEST_CASE("sensor model") {
  SensorModel m;
  m.sigma = 1.0;
  m.eta = 0.0;
  CHECK(sensor_value(m, {0, 0}, 0, false) == 0.0);
  CHECK(sensor_value(m, {0, 0}, 0, true) == 1.0);
  CHECK(sensor_value(m, {0.5, -0.5}, 3, true) == doctest::Approx(expected_signal({0.5, -0.5}, 1.0)));
  m.sigma = 2.0;
  m.optimum = {1.0, 1.0};
  CHECK(sensor_value(m, {1.5, 0.0}, 0, true) == doctest::Approx(expected_signal({0.5, -1.0}, 2.0)));

  m.eta = 0.05;
  m.seed = 7;
  std::set<double> distinct;
  for (std::uint64_t moves = 0; moves < 50; ++moves) {
    double v = sensor_value(m, {1.0, 1.0}, moves, true);
    CHECK(v == sensor_value(m, {1.0, 1.0}, moves, true));
    CHECK(v <= 1.0);
    CHECK(v >= 1.0 - 0.05);
    distinct.insert(v);
  }
  CHECK(distinct.size() > 40);
  double base = expected_signal({0.5, -1.0}, 2.0);
  CHECK(std::fabs(sensor_value(m, {1.5, 0.0}, 9, true) - base) <= 0.05 + 1e-12);
}

TEST_CASE("sensor holds its value while the actuator moves") {
  Bench bench;
  kernel::ProcessContext& ctx = bench.ctx;
  auto sensor = std::make_shared<Sensor>(
      distributed("sens", "sensor",
                  {{"shutter", "shut"}, {"actuator", "act"}, {"sigma", 1.0}, {"eta", 0.0}}),
      ctx);
  CHECK(sensor->read() == 0.0);  // shutter closed
  bench.shutter->open();
  bench.world->advance(5);
  CHECK(sensor->read() == 1.0);
  auto token = bench.reservations->reserve("act", "op").token;
  bench.actuator->move_to({0.5, 0, 0, 0}, token);
  bench.world->advance(3);
  CHECK(sensor->read() == 1.0);
  bench.world->advance(100);
  CHECK(sensor->read() == doctest::Approx(std::exp(-0.25)));
  sensor->on_shutdown();
}

TEST_CASE("sensor readings replay identically for a fixed seed and trajectory") {
  auto run = [] {
    Bench bench;
    bench.shutter->open();
    bench.world->advance(5);
    auto sensor = std::make_shared<Sensor>(
        distributed("sens", "sensor",
                    {{"shutter", "shut"}, {"actuator", "act"}, {"eta", 0.02}, {"seed", 11}}),
        bench.ctx);
    auto token = bench.reservations->reserve("act", "op").token;
    std::vector<double> out;
    for (int i = 0; i < 10; ++i) {
      bench.actuator->move_to({0.1 * i, -0.05 * i, 0, 0}, token);
      bench.world->advance(20);
      out.push_back(sensor->read());
    }
    sensor->on_shutdown();
    return out;
  };
  auto a = run();
  CHECK(a == run());
}

TEST_CASE("demo facility: controllers stay private, each FEP hosts its manifest") {
  DemoFacility demo;
  demo.launch();
  std::set<std::string> names;
  for (const auto& e : demo.manager->names().entries()) names.insert(e.object);
  CHECK(names == std::set<std::string>{"actuator_A", "actuator_B", "shutter_1", "sensor_1", "align_lcu"});
  for (auto n : {"ax1", "ax2", "ax3", "ax4", "dio1"}) {
    CHECK(error_of([&] { demo.manager->names().resolve(n); }) == ErrorCode::kNoSuchObject);
  }
  auto hosted = [&](const std::string& p) {
    std::vector<std::string> out;
    for (const auto& o : demo.process(p).objects()) out.push_back(o->name());
    return out;
  };
  CHECK(hosted("fep_align1") ==
        std::vector<std::string>{"ax1", "ax2", "ax3", "ax4", "actuator_A", "actuator_B"});
  CHECK(hosted("fep_diag1") == std::vector<std::string>{"dio1", "shutter_1", "sensor_1"});
}

TEST_CASE("the diagnostics manifest does not boot under the alignment template") {
  DemoOptions opts;
  opts.edit = [](json& doc) {
    for (auto& p : doc["processes"]) {
      if (p["name"] == "fep_diag1") p["template"] = "alignment_fep";
    }
  };
  DemoFacility demo(opts);
  CHECK(error_of([&] { demo.launch(); }) == ErrorCode::kAppError);
  auto diag = demo.manager->table().get("fep_diag1");
  CHECK(diag.state == sysman::ProcessState::kFailed);
  CHECK(diag.reason.find("unknown type_tag 'dio_channel'") != std::string::npos);
  // Same launch phase, so it may still be finishing its boot.
  CHECK(eventually([&] { return demo.manager->table().get("fep_align1").state == sysman::ProcessState::kReady; }));
}

TEST_CASE("alignment converges from the fixture offsets") {
  DemoFacility demo;
  demo.launch();
  auto lcu = demo.object<AlignmentLcu>("sup_align", "align_lcu");
  auto sensor = demo.object<Sensor>("fep_diag1", "sensor_1");
  CHECK(lcu->monitors_open() == 3);
  CHECK(sensor->read() < 0.9);

  lcu->align(0.9, 200);
  CHECK(error_of([&] { lcu->align(0.9, 200); }) == ErrorCode::kAppError);
  REQUIRE(lcu->wait_settled(Millis(30000)) == AlignPhase::kAligned);
  CHECK(sensor->read() >= 0.9);
  auto summary = lcu->last_published("summary");
  REQUIRE(summary.entries.size() == 3);
  CHECK(summary.entries[0].second == FieldValue(std::string("aligned")));
  CHECK(std::get<double>(summary.entries[1].second) >= 0.9);
  CHECK_FALSE(demo.manager->reservations().holder_of("actuator_A"));

  CHECK(error_of([&] { lcu->align(0.9, 5); }) == ErrorCode::kAppError);
  lcu->reset();
  CHECK(lcu->phase() == AlignPhase::kIdle);
}

TEST_CASE("alignment faults when the noise floor hides the threshold") {
  DemoOptions opts;
  opts.edit = [](json& doc) {
    for (auto& p : doc["processes"]) {
      for (auto& o : p["objects"]) {
        if (o["name"] == "sensor_1") o["params"]["eta"] = 0.05;
      }
    }
  };
  DemoFacility demo(opts);
  demo.launch();
  auto lcu = demo.object<AlignmentLcu>("sup_align", "align_lcu");
  lcu->align(1.0, 12);
  REQUIRE(lcu->wait_settled(Millis(30000)) == AlignPhase::kFault);
  auto summary = lcu->last_published("summary");
  CHECK(std::get<double>(summary.entries[2].second) == 12.0);
}

TEST_CASE("align is refused while someone else holds the actuator") {
  DemoFacility demo;
  demo.launch();
  demo.manager->reservations().reserve("actuator_A", "someone");
  auto lcu = demo.object<AlignmentLcu>("sup_align", "align_lcu");
  CHECK(error_of([&] { lcu->align(0.9, 10); }) == ErrorCode::kReserved);
  CHECK(lcu->phase() == AlignPhase::kIdle);
}
