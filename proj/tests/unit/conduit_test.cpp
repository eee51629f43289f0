#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>
#include <vector>

#include "iccs/conduit/client.hpp"
#include "iccs/conduit/envelope.hpp"
#include "iccs/conduit/frame.hpp"
#include "iccs/conduit/object_ref.hpp"
#include "iccs/conduit/server.hpp"
#include "support.hpp"

using namespace iccs;
using namespace iccs::conduit;
using iccs::testing::error_of;
using iccs::testing::MapResolver;

namespace {

std::string random_token(std::mt19937& rng) {
  static const std::string alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_.-";
  std::uniform_int_distribution<std::size_t> len(1, 12);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) s += alphabet[pick(rng)];
  return s;
}

// Echo server: replies with the call's args, answers __ping, fails "boom".
std::unique_ptr<Server> echo_server(std::uint16_t port = 0) {
  auto server = std::make_unique<Server>("127.0.0.1", port);
  server->start([](Envelope call, Server::Responder respond) {
    if (call.method == kPingMethod) return respond(Envelope::ok(call.id, nullptr));
    if (call.method == "boom") {
      return respond(Envelope::failure(call.id, ErrorCode::kOutOfRange, "too far"));
    }
    respond(Envelope::ok(call.id, call.args));
  });
  return server;
}

ObjectRef local_ref(std::uint16_t port, std::string object = "obj") {
  return ObjectRef{"127.0.0.1", port, "proc", std::move(object)};
}

}  // namespace

TEST_CASE("parse_ref reads the canonical grammar") {
  auto ref = parse_ref("ref://10.0.0.1:7001/fep_align1/actuator_A");
  CHECK(ref.host == "10.0.0.1");
  CHECK(ref.port == 7001);
  CHECK(ref.process == "fep_align1");
  CHECK(ref.object == "actuator_A");
  CHECK(format_ref(ref) == "ref://10.0.0.1:7001/fep_align1/actuator_A");
}

TEST_CASE("parse_ref rejects malformed text") {
  for (const char* bad : {"ref://nohost", "ref://h:0/p/o", "ref://h:70000/p/o", "http://h:1/p/o",
                          "ref://h:1/p", "ref://h:1/p/o/x", "ref://h:1/p q/o", "ref://:1/p/o",
                          "ref://h:x1/p/o", ""}) {
    CAPTURE(bad);
    CHECK(error_of([&] { parse_ref(bad); }) == ErrorCode::kBadArgs);
  }
}

TEST_CASE("format_ref and parse_ref round-trip for random valid refs") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> port(1, 65535);
  for (int i = 0; i < 500; ++i) {
    ObjectRef r{random_token(rng), static_cast<std::uint16_t>(port(rng)), random_token(rng),
                random_token(rng)};
    auto text = format_ref(r);
    CHECK(parse_ref(text) == r);
    CHECK(format_ref(parse_ref(text)) == text);
  }
}

TEST_CASE("encode_frame is a big-endian length prefix") {
  CHECK(encode_frame(std::string_view("{}")) == std::vector<std::uint8_t>{0, 0, 0, 2, 0x7B, 0x7D});
  CHECK(encode_frame(std::string_view()) == std::vector<std::uint8_t>{0, 0, 0, 0});
  std::string big(0x010203, 'x');
  auto f = encode_frame(big);
  CHECK(f[0] == 0x00);
  CHECK(f[1] == 0x01);
  CHECK(f[2] == 0x02);
  CHECK(f[3] == 0x03);
}

TEST_CASE("decode(encode(p)) == p and truncation never yields a payload") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> len(0, 1u << 20);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 12; ++i) {
    std::size_t n = i < 3 ? static_cast<std::size_t>(i) : len(rng);
    std::vector<std::uint8_t> p(n);
    for (auto& b : p) b = static_cast<std::uint8_t>(byte(rng));
    auto frame = encode_frame(p);
    auto decoded = decode_frame(frame);
    REQUIRE(decoded);
    CHECK(*decoded == p);
    std::uniform_int_distribution<std::size_t> cut(0, frame.size() - 1);
    for (int k = 0; k < 8; ++k) {
      auto c = cut(rng);
      CHECK_FALSE(decode_frame(std::span(frame.data(), c)));
    }
  }
}

TEST_CASE("FrameDecoder reassembles frames split at arbitrary points") {
  std::mt19937 rng(3);
  std::vector<std::string> payloads;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 200; ++i) {
    std::string p = random_token(rng);
    if (i % 17 == 0) p.clear();
    payloads.push_back(p);
    auto f = encode_frame(p);
    stream.insert(stream.end(), f.begin(), f.end());
  }
  FrameDecoder decoder;
  std::vector<std::string> out;
  std::uniform_int_distribution<std::size_t> chunk(1, 37);
  for (std::size_t pos = 0; pos < stream.size();) {
    std::size_t n = std::min(chunk(rng), stream.size() - pos);
    decoder.feed(std::span(stream.data() + pos, n));
    pos += n;
    while (auto p = decoder.next()) out.push_back(*p);
  }
  CHECK(out == payloads);
}

TEST_CASE("FrameDecoder rejects oversize frames") {
  FrameDecoder decoder(16);
  auto f = encode_frame(std::string(17, 'a'));
  CHECK(error_of([&] { decoder.feed(f); }) == ErrorCode::kCommFailure);
}

TEST_CASE("envelope JSON carries exactly one field group") {
  auto call = to_json(Envelope::call(3, "obj", "move", {{"x", 1}}));
  CHECK(call == json{{"id", 3}, {"kind", "call"}, {"object", "obj"}, {"method", "move"},
                     {"args", {{"x", 1}}}});
  auto ok = to_json(Envelope::ok(3, 42));
  CHECK(ok == json{{"id", 3}, {"kind", "reply"}, {"status", "ok"}, {"value", 42}});
  auto err = to_json(Envelope::failure(4, ErrorCode::kReserved, "held"));
  CHECK(err == json{{"id", 4},
                    {"kind", "reply"},
                    {"status", "error"},
                    {"error", {{"code", "RESERVED"}, {"message", "held"}}}});

  auto back = parse_envelope(err.dump());
  CHECK(back.error->code == ErrorCode::kReserved);
  CHECK(back.id == 4);

  CHECK(error_of([] { parse_envelope(R"({"id":1,"kind":"call","object":"o","method":"m","status":"ok"})"); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([] { parse_envelope(R"({"id":1,"kind":"reply","status":"ok","method":"m"})"); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([] { parse_envelope(R"({"id":-1,"kind":"reply","status":"ok"})"); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([] { parse_envelope(R"({"id":1,"kind":"reply","status":"error","error":{"code":"NOPE"}})"); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([] { parse_envelope("not json"); }) == ErrorCode::kBadArgs);
}

TEST_CASE("ping reports liveness") {
  auto server = echo_server();
  CHECK(ping(local_ref(server->port()), Millis(500)));
  std::uint16_t port = server->port();
  server.reset();
  CHECK_FALSE(ping(local_ref(port), Millis(300)));
}

TEST_CASE("ping on a responder that accepts but never replies is false after the timeout") {
  Listener stalled("127.0.0.1", 0);
  std::atomic<bool> stop{false};
  std::thread acceptor([&] {
    std::vector<Socket> held;
    while (!stop) {
      if (auto s = stalled.accept(Millis(20))) held.push_back(std::move(*s));
    }
  });
  auto t0 = std::chrono::steady_clock::now();
  CHECK_FALSE(ping(local_ref(stalled.port()), Millis(200)));
  auto elapsed = std::chrono::steady_clock::now() - t0;
  CHECK(elapsed >= Millis(190));
  CHECK(elapsed < Millis(1500));
  stop = true;
  acceptor.join();
}

TEST_CASE("invoke relays values and server-side error codes") {
  auto server = echo_server();
  Client client(local_ref(server->port()));
  CHECK(client.invoke("echo", {{"a", 1}}) == json{{"a", 1}});
  CHECK(client.invoke(kPingMethod, nullptr).is_null());
  CHECK(error_of([&] { client.invoke("boom"); }) == ErrorCode::kOutOfRange);
}

TEST_CASE("concurrent calls on one connection get their own replies under random ordering") {
  Server server("127.0.0.1", 0);
  std::mt19937 rng(5);
  std::mutex rng_mu;
  std::vector<std::thread> responders;
  std::mutex responders_mu;
  server.start([&](Envelope call, Server::Responder respond) {
    int delay;
    {
      std::lock_guard lock(rng_mu);
      delay = std::uniform_int_distribution<int>(0, 15)(rng);
    }
    std::lock_guard lock(responders_mu);
    responders.emplace_back([call = std::move(call), respond = std::move(respond), delay] {
      std::this_thread::sleep_for(Millis(delay));
      respond(Envelope::ok(call.id, call.args));
    });
  });

  Client client(local_ref(server.port()));
  std::atomic<int> mismatches{0};
  std::vector<std::thread> callers;
  for (int t = 0; t < 8; ++t) {
    callers.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        json args = {{"caller", t}, {"i", i}};
        if (client.invoke("echo", args) != args) ++mismatches;
      }
    });
  }
  for (auto& c : callers) c.join();
  CHECK(mismatches == 0);
  server.stop();
  std::lock_guard lock(responders_mu);
  for (auto& r : responders) r.join();
}

TEST_CASE("connection to a dead endpoint is CONNECT_FAILED when never connected") {
  std::uint16_t port;
  {
    Listener l("127.0.0.1", 0);
    port = l.port();
  }
  Client client(local_ref(port), {ConnectionPolicy{.call_timeout = Millis(200)}, {}, {}});
  CHECK(error_of([&] { client.invoke("echo"); }) == ErrorCode::kConnectFailed);
}

TEST_CASE("previously successful connection: server killed, no refresh -> COMM_FAILURE") {
  auto server = echo_server();
  ConnectionPolicy policy;
  policy.call_timeout = Millis(300);
  Client client(local_ref(server->port()), {policy, {}, {}});
  CHECK(client.invoke("echo", 1) == 1);
  server.reset();
  CHECK(error_of([&] { client.invoke("echo", 2); }) == ErrorCode::kCommFailure);
  // Still unreachable: a handle that once worked keeps reporting COMM_FAILURE.
  CHECK(error_of([&] { client.invoke("echo", 3); }) == ErrorCode::kCommFailure);
}

TEST_CASE("ping + refresh recovers after the server moves to a new port") {
  auto resolver = std::make_shared<MapResolver>();
  auto server = echo_server();
  resolver->set("obj", local_ref(server->port()));

  ConnectionPolicy policy{.ping_before_invoke = true, .refresh_on_failure = true,
                          .max_attempts = 5, .retry_backoff = Millis(50),
                          .call_timeout = Millis(300)};
  Client client(std::string("obj"), {policy, resolver, {}});
  CHECK(client.invoke("echo", 1) == 1);

  server.reset();
  std::thread restarter([&] {
    std::this_thread::sleep_for(Millis(80));
    server = echo_server();
    resolver->set("obj", local_ref(server->port()));
  });
  CHECK(client.invoke("echo", 2) == 2);
  restarter.join();
  CHECK(client.last_attempts() >= 2);
  CHECK(client.last_attempts() <= 5);
  CHECK(client.ref()->port == server->port());
}

TEST_CASE("refresh gives up after max_attempts cycles") {
  auto resolver = std::make_shared<MapResolver>();
  std::uint16_t dead_port;
  {
    Listener l("127.0.0.1", 0);
    dead_port = l.port();
  }
  resolver->set("obj", local_ref(dead_port));
  ConnectionPolicy policy{.ping_before_invoke = true, .refresh_on_failure = true,
                          .max_attempts = 3, .retry_backoff = Millis(10),
                          .call_timeout = Millis(100)};
  Client client(std::string("obj"), {policy, resolver, {}});
  resolver->resolves = 0;
  auto t0 = std::chrono::steady_clock::now();
  CHECK(error_of([&] { client.invoke("echo"); }) == ErrorCode::kConnectFailed);
  CHECK(std::chrono::steady_clock::now() - t0 <= policy.worst_case());
  CHECK(client.last_attempts() == 3);
  CHECK(resolver->resolves == 3);
}

TEST_CASE("wait_for_presence blocks until the target registers") {
  auto resolver = std::make_shared<MapResolver>();
  ConnectionPolicy policy{.wait_for_presence = true, .max_attempts = 10,
                          .retry_backoff = Millis(50), .call_timeout = Millis(200)};
  Client client(std::string("late"), {policy, resolver, {}});
  std::unique_ptr<Server> server;
  std::thread starter([&] {
    std::this_thread::sleep_for(Millis(300));
    server = echo_server();
    resolver->set("late", local_ref(server->port(), "late"));
  });
  auto t0 = std::chrono::steady_clock::now();
  CHECK(client.invoke("echo", "hi") == "hi");
  CHECK(std::chrono::steady_clock::now() - t0 >= Millis(290));
  starter.join();
}

TEST_CASE("unknown name without recovery is NO_SUCH_OBJECT; with presence wait it is CONNECT_FAILED") {
  auto resolver = std::make_shared<MapResolver>();
  Client plain(std::string("ghost"), {ConnectionPolicy{}, resolver, {}});
  CHECK(error_of([&] { plain.invoke("x"); }) == ErrorCode::kNoSuchObject);
  ConnectionPolicy waiting{.wait_for_presence = true, .max_attempts = 2,
                           .retry_backoff = Millis(10), .call_timeout = Millis(50)};
  Client patient(std::string("ghost"), {waiting, resolver, {}});
  CHECK(error_of([&] { patient.invoke("x"); }) == ErrorCode::kConnectFailed);
}

TEST_CASE("mid-invocation stall surfaces TIMEOUT and is not retried") {
  Server server("127.0.0.1", 0);
  std::atomic<int> calls{0};
  server.start([&](Envelope call, Server::Responder respond) {
    if (call.method == kPingMethod) return respond(Envelope::ok(call.id, nullptr));
    ++calls;  // never replies
  });
  ConnectionPolicy policy{.ping_before_invoke = true, .refresh_on_failure = true,
                          .max_attempts = 5, .retry_backoff = Millis(10),
                          .call_timeout = Millis(200)};
  Client client(local_ref(server.port()), {policy, {}, {}});
  auto t0 = std::chrono::steady_clock::now();
  CHECK(error_of([&] { client.invoke("hang"); }) == ErrorCode::kTimeout);
  auto elapsed = std::chrono::steady_clock::now() - t0;
  CHECK(elapsed >= Millis(190));
  CHECK(elapsed < Millis(450));
  CHECK(calls == 1);
}

TEST_CASE("reply delay fault longer than call_timeout gives TIMEOUT") {
  auto server = echo_server();
  server->set_reply_delay(Millis(300));
  Client client(local_ref(server->port()), {ConnectionPolicy{.call_timeout = Millis(100)}, {}, {}});
  CHECK(error_of([&] { client.invoke("echo"); }) == ErrorCode::kTimeout);
}

TEST_CASE("drop_connections forces the recovery path") {
  auto resolver = std::make_shared<MapResolver>();
  auto server = echo_server();
  resolver->set("obj", local_ref(server->port()));
  ConnectionPolicy policy{.ping_before_invoke = true, .refresh_on_failure = true,
                          .max_attempts = 3, .retry_backoff = Millis(10),
                          .call_timeout = Millis(300)};
  Client client(std::string("obj"), {policy, resolver, {}});
  CHECK(client.invoke("echo", 1) == 1);
  server->drop_connections();
  CHECK(client.invoke("echo", 2) == 2);
}

TEST_CASE("policy validation and JSON form") {
  CHECK(error_of([] { ConnectionPolicy{.max_attempts = 0}.validate(); }) == ErrorCode::kBadArgs);
  CHECK(error_of([] { ConnectionPolicy{.call_timeout = Millis(0)}.validate(); }) ==
        ErrorCode::kBadArgs);
  CHECK(error_of([] { ConnectionPolicy{.retry_backoff = Millis(-1)}.validate(); }) ==
        ErrorCode::kBadArgs);
  ConnectionPolicy p{.ping_before_invoke = true, .max_attempts = 3, .call_timeout = Millis(250)};
  auto q = ConnectionPolicy::from_json(p.to_json());
  CHECK(q.ping_before_invoke);
  CHECK(q.max_attempts == 3);
  CHECK(q.call_timeout == Millis(250));
  CHECK(p.worst_case() == Millis(250 + 3 * (100 + 250)));
}
