#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "iccs/kernel/host.hpp"
#include "iccs/services/remote.hpp"
#include "iccs/services/service_objects.hpp"
#include "iccs/services/stores.hpp"
#include "support.hpp"

using namespace iccs;
using namespace iccs::services;
using iccs::testing::error_of;
using iccs::testing::eventually;

namespace {

// Records `alert` calls pushed by the event service.
class AlertSink : public kernel::Configurable {
 public:
  AlertSink() : Configurable("sink", kernel::Scope::kDistributed, "alert_sink") {
    expose("alert", [this](const json& a) {
      std::lock_guard lock(mu);
      received.push_back(a);
      return json(nullptr);
    });
  }
  std::vector<json> snapshot() {
    std::lock_guard lock(mu);
    return received;
  }
  std::mutex mu;
  std::vector<json> received;
};

}  // namespace

TEST_CASE("log seqs are consecutive and queries filter by severity") {
  LogStore store;
  auto s1 = store.append("p", log::Severity::kInfo, "one");
  auto s2 = store.append("p", log::Severity::kWarning, "two");
  store.append("p", log::Severity::kError, "three");
  CHECK(s2 == s1 + 1);
  auto warn = store.query(log::Severity::kWarning);
  REQUIRE(warn.size() == 2);
  CHECK(warn[0].text == "two");
  CHECK(warn[1].text == "three");
  CHECK(store.query(log::Severity::kDebug, s2).size() == 1);
}

TEST_CASE("1000 concurrent appends get 1000 distinct consecutive seqs") {
  LogStore store;
  std::mutex mu;
  std::vector<std::uint64_t> seqs;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 125; ++i) {
        auto seq = store.append("p" + std::to_string(t), log::Severity::kInfo, "m");
        std::lock_guard lock(mu);
        seqs.push_back(seq);
      }
    });
  }
  for (auto& th : threads) th.join();
  std::sort(seqs.begin(), seqs.end());
  REQUIRE(seqs.size() == 1000);
  for (std::size_t i = 1; i < seqs.size(); ++i) CHECK(seqs[i] == seqs[i - 1] + 1);
  auto all = store.query();
  CHECK(std::is_sorted(all.begin(), all.end(),
                       [](const auto& a, const auto& b) { return a.seq < b.seq; }));
}

TEST_CASE("log file mirror writes one JSON record per line") {
  auto path = std::filesystem::temp_directory_path() / "iccs_log_mirror.ndjson";
  std::filesystem::remove(path);
  {
    LogStore store(16, path);
    store.append("p", log::Severity::kInfo, "hello");
    store.append("p", log::Severity::kError, "world");
  }
  std::ifstream in(path);
  std::string line;
  std::vector<json> lines;
  while (std::getline(in, line)) lines.push_back(json::parse(line));
  REQUIRE(lines.size() == 2);
  CHECK(lines[1]["severity"] == "error");
  CHECK(lines[1]["text"] == "world");
}

TEST_CASE("ring buffer retains the newest records") {
  LogStore store(3);
  for (int i = 0; i < 5; ++i) store.append("p", log::Severity::kInfo, std::to_string(i));
  auto all = store.query();
  REQUIRE(all.size() == 3);
  CHECK(all.front().text == "2");
}

TEST_CASE("alerts: raise, acknowledge once, never vanish") {
  EventStore store(4);
  auto id = store.raise_alert("overheat", "fep_a", {{"t", 90}}, AlertSeverity::kCritical);
  for (int i = 0; i < 10; ++i) store.post("noise", "fep_a", nullptr);
  auto raised = store.alerts(AlertState::kRaised);
  REQUIRE(raised.size() == 1);
  CHECK(raised[0].id == id);
  CHECK_FALSE(raised[0].acked_by);

  store.acknowledge(id, "op1");
  auto acked = store.alerts(AlertState::kAcknowledged);
  REQUIRE(acked.size() == 1);
  CHECK(acked[0].acked_by == std::optional<std::string>("op1"));
  CHECK(error_of([&] { store.acknowledge(id, "op2"); }) == ErrorCode::kBadArgs);
  CHECK(error_of([&] { store.acknowledge(999, "op1"); }) == ErrorCode::kNoSuchObject);
}

TEST_CASE("reservation rules") {
  ReservationTable table;
  auto r = table.reserve("actuator_A", "alice");
  CHECK(error_of([&] { table.reserve("actuator_A", "bob"); }) == ErrorCode::kReserved);
  auto again = table.reserve("actuator_A", "alice");
  CHECK(again.token == r.token);
  CHECK(table.list().size() == 1);
  CHECK(table.check("actuator_A", r.token));
  CHECK_FALSE(table.check("actuator_A", "forged"));
  CHECK(error_of([&] { table.release("forged"); }) == ErrorCode::kBadArgs);
  table.release(r.token);
  CHECK_FALSE(table.check("actuator_A", r.token));
  auto bob = table.reserve("actuator_A", "bob");
  CHECK(bob.holder == "bob");
  CHECK(bob.token != r.token);
}

TEST_CASE("reservation lease lapses") {
  ReservationTable table(Millis(50));
  auto r = table.reserve("d", "alice");
  std::this_thread::sleep_for(Millis(80));
  CHECK_FALSE(table.check("d", r.token));
  CHECK(table.reserve("d", "bob").holder == "bob");
}

TEST_CASE("concurrent reserve/release never yields two holders") {
  ReservationTable table;
  const std::vector<std::string> devices = {"d0", "d1", "d2", "d3"};
  // Holder-count oracle: each holder marks the devices it believes it holds.
  std::array<std::atomic<int>, 4> holders{};
  std::atomic<int> violations{0};
  std::atomic<int> ops{0};
  std::vector<std::thread> threads;
  for (int h = 0; h < 8; ++h) {
    threads.emplace_back([&, h] {
      std::mt19937 rng(static_cast<unsigned>(h) * 7919u + 1u);
      std::array<std::optional<std::string>, 4> mine{};
      for (int i = 0; i < 1250; ++i) {
        auto d = rng() % 4;
        if (mine[d]) {
          if (holders[d].fetch_sub(1) != 1) ++violations;
          table.release(*mine[d]);
          mine[d].reset();
        } else {
          try {
            auto r = table.reserve(devices[d], "h" + std::to_string(h));
            if (holders[d].fetch_add(1) != 0) ++violations;
            mine[d] = r.token;
          } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kReserved);
          }
        }
        ++ops;
      }
      for (std::size_t d = 0; d < 4; ++d) {
        if (mine[d]) {
          holders[d].fetch_sub(1);
          table.release(*mine[d]);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ops == 10000);
  CHECK(violations == 0);
  CHECK(table.list().empty());
}

TEST_CASE("service objects over the wire") {
  kernel::Host central({"sysman", "127.0.0.1", 0, 8});
  auto logs = std::make_shared<LogStore>();
  auto events = std::make_shared<EventStore>();
  auto table = std::make_shared<ReservationTable>();
  central.add(std::make_shared<LogService>(logs));
  central.add(std::make_shared<EventService>(events));
  central.add(std::make_shared<ReservationService>(table));
  central.start();

  kernel::Host gw({"gw", "127.0.0.1", 0, 2});
  auto sink = std::make_shared<AlertSink>();
  gw.add(sink);
  gw.start();

  conduit::ConnectionPolicy policy;
  RemoteEvents remote_events(central.ref_for(kEventsObject), policy);
  RemoteReservations remote_res(central.ref_for(kReservationsObject), policy);

  SUBCASE("alert subscribers see raise then acknowledge") {
    auto sub = conduit::invoke(central.ref_for(kEventsObject), "subscribe_alerts",
                               {{"subscriber", conduit::format_ref(gw.ref_for("sink"))}}, policy);
    auto id = remote_events.raise_alert("door_open", "fep_x", nullptr, AlertSeverity::kWarning);
    remote_events.acknowledge(id, "op1");
    REQUIRE(eventually([&] { return sink->snapshot().size() == 2; }));
    auto got = sink->snapshot();
    CHECK(got[0]["kind"] == "raised");
    CHECK(got[1]["kind"] == "acknowledged");
    CHECK(got[1]["alert"]["acked_by"] == "op1");
    CHECK(error_of([&] { remote_events.acknowledge(id, "op1"); }) == ErrorCode::kBadArgs);
    CHECK(error_of([&] { remote_events.acknowledge(4242, "op1"); }) == ErrorCode::kNoSuchObject);
    conduit::invoke(central.ref_for(kEventsObject), "unsubscribe_alerts", sub, policy);
  }

  SUBCASE("events post in order") {
    for (int i = 0; i < 20; ++i) remote_events.post_event("tick", "fep_x", {{"i", i}});
    REQUIRE(remote_events.flush(Millis(2000)));
    auto posted = events->query(std::string("tick"));
    REQUIRE(posted.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(posted[i].payload["i"] == i);
  }

  SUBCASE("remote reservations") {
    auto r = remote_res.reserve("actuator_A", "alice");
    CHECK(remote_res.check("actuator_A", r.token));
    CHECK(error_of([&] { remote_res.reserve("actuator_A", "bob"); }) == ErrorCode::kReserved);
    remote_res.release(r.token);
    CHECK_FALSE(remote_res.check("actuator_A", r.token));
  }

  SUBCASE("log forwarder delivers to the central log") {
    LogForwarder forwarder(central.ref_for(kLogObject), "fep_x", policy);
    forwarder.forward(log::Severity::kWarning, "limit switch");
    REQUIRE(forwarder.flush(Millis(2000)));
    auto recs = logs->query(log::Severity::kWarning);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].process == "fep_x");
  }
}
