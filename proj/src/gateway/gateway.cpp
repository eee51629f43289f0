#include "iccs/gateway/gateway.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "http_server.hpp"
#include "iccs/gateway/panels.hpp"
#include "iccs/logging.hpp"
#include "iccs/registry/registry_service.hpp"
#include "iccs/services/service_objects.hpp"
#include "iccs/sysman/local_manager.hpp"

namespace iccs::gateway {

namespace {

constexpr auto kPendingTtl = std::chrono::seconds(10);

std::string route_key(const std::string& publisher, bool mapper, std::uint64_t remote) {
  return fmt::format("{}|{}|{}", publisher, mapper ? "m" : "r", remote);
}

json error_json(ErrorCode code, const std::string& message) {
  return {{"code", to_string(code)}, {"message", message}};
}

conduit::ConnectionPolicy quick_policy() {
  conduit::ConnectionPolicy p;
  p.call_timeout = Millis(500);
  return p;
}

}  // namespace

conduit::ConnectionPolicy console_policy() {
  conduit::ConnectionPolicy p;
  p.ping_before_invoke = true;
  p.refresh_on_failure = true;
  p.max_attempts = 3;
  return p;
}

struct Gateway::Session {
  std::uint64_t id = 0;
  std::string operator_id;
  Sink sink;
  std::function<void()> disconnect;
  std::map<std::string, std::string> tokens;  // device -> reservation token
  std::unique_ptr<kernel::SerialWorker> inbox = std::make_unique<kernel::SerialWorker>(4096);
  bool closed = false;
};

Gateway::Gateway(const registry::ObjectSpec& spec, kernel::ProcessContext& context)
    : Director(spec.name, spec.scope, spec.type_tag),
      context_(context),
      spec_(spec),
      outbox_limit_(spec.params.value("outbox_limit", kDefaultOutboxLimit)) {
  auto port = spec.params.value("http_port", 8080);
  if (port < 0 || port > 65535) throw Error(ErrorCode::kBadArgs, fmt::format("{}: bad http_port", spec.name));
  if (outbox_limit_ == 0) throw Error(ErrorCode::kBadArgs, fmt::format("{}: outbox_limit must be > 0", spec.name));

  if (auto reg = std::dynamic_pointer_cast<registry::RegistryClient>(context.resolver)) {
    central_ = reg->ref();
    config_ = reg->config();
    events_ = std::make_shared<conduit::Client>(central_->with_object(services::kEventsObject),
                                                context.client_options(quick_policy()));
    sysman_ = std::make_shared<conduit::Client>(central_->with_object(sysman::kSysmanObject),
                                                context.client_options(quick_policy()));
  }

  expose("alert", [this](const json& a) {
    broadcast({{"kind", "alert"}, {"event", a.at("kind")}, {"alert", a.at("alert")}});
    return json(nullptr);
  });
  expose("broadview", [this](const json&) { return broadview(); });
  expose("sessions", [this](const json&) {
    return json{{"sessions", session_count()}, {"subscriptions", subscription_count()}};
  });
}

Gateway::~Gateway() { on_shutdown(); }

void Gateway::on_ready() {
  if (events_) {
    try {
      auto reply = events_->invoke(
          "subscribe_alerts", {{"subscriber", conduit::format_ref(context_.self_ref(name()))}});
      alert_subscription_ = reply.at("subscription").get<std::uint64_t>();
    } catch (const Error& e) {
      log::warning("{}: no alert feed: {}", name(), e.what());
    }
  }
  server_ = std::make_unique<HttpServer>(*this, spec_.params.value("host", std::string("0.0.0.0")),
                                         static_cast<std::uint16_t>(spec_.params.value("http_port", 8080)),
                                         spec_.params.value("static_dir", std::string()));
  log::info("{}: console listener on port {}", name(), server_->port());
}

void Gateway::on_shutdown() {
  if (server_) {
    server_->stop();
    server_.reset();
  }
  std::vector<std::uint64_t> ids;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, _] : sessions_) ids.push_back(id);
  }
  for (auto id : ids) close_session(id);
  cleanup_.drain(Millis(2000));
  if (events_ && alert_subscription_) {
    try {
      events_->invoke("unsubscribe_alerts", {{"subscription", alert_subscription_}});
    } catch (const Error&) {
    }
    alert_subscription_ = 0;
  }
}

std::uint16_t Gateway::http_port() const { return server_ ? server_->port() : 0; }

json Gateway::styles() const {
  json tokens = default_style_tokens();
  if (spec_.params.contains("styles")) tokens.merge_patch(spec_.params["styles"]);
  auto file = spec_.params.value("styles_file", std::string());
  if (!file.empty()) {
    std::ifstream in(file);
    if (in) {
      try {
        tokens.merge_patch(json::parse(in));
      } catch (const json::exception& e) {
        log::warning("{}: ignoring {}: {}", name(), file, e.what());
      }
    }
  }
  return tokens;
}

json Gateway::broadview() {
  json out = {{"facility", ""}, {"processes", json::array()}};
  if (!config_) return out;
  out["facility"] = config_->facility_name;

  std::map<std::string, std::string> states;
  if (sysman_) {
    try {
      for (const auto& r : sysman_->invoke("query_states")) states[r["name"]] = r["state"];
    } catch (const Error& e) {
      log::warning("{}: broadview states: {}", name(), e.what());
    }
  }
  std::map<std::string, int> alerts;
  if (events_) {
    try {
      for (const auto& a : events_->invoke("alerts", {{"state", "raised"}})) {
        const auto& ev = a["event"];
        std::set<std::string> subjects{ev.value("source", std::string())};
        for (auto key : {"device", "process", "publisher"}) {
          if (ev["payload"].is_object() && ev["payload"].contains(key) && ev["payload"][key].is_string()) {
            subjects.insert(ev["payload"][key].get<std::string>());
          }
        }
        for (const auto& s : subjects) ++alerts[s];
      }
    } catch (const Error& e) {
      log::warning("{}: broadview alerts: {}", name(), e.what());
    }
  }

  for (const auto& p : config_->processes) {
    auto state = states.count(p.name) ? states[p.name] : std::string("unknown");
    json node = {{"name", p.name},
                 {"category", registry::to_string(p.category)},
                 {"state", state},
                 {"failed", state == "failed"},
                 {"alerts", alerts[p.name]},
                 {"objects", json::array()}};
    for (const auto& o : p.objects) {
      if (o.scope != registry::Scope::kDistributed) continue;
      node["objects"].push_back({{"name", o.name},
                                 {"type_tag", o.type_tag},
                                 {"has_panel", panel_for(o.type_tag).has_value()},
                                 {"alerts", alerts[o.name]}});
    }
    out["processes"].push_back(node);
  }
  return out;
}

std::string Gateway::type_tag_of(const std::string& object) const {
  if (!config_) return {};
  for (const auto& p : config_->processes) {
    for (const auto& o : p.objects) {
      if (o.name == object) return o.type_tag;
    }
  }
  return {};
}

std::shared_ptr<conduit::Client> Gateway::client_for(const std::string& target) {
  // Consoles only reach distributed objects the facility declares.
  if (config_) {
    bool known = false;
    for (const auto& p : config_->processes) {
      for (const auto& o : p.objects) known |= o.name == target && o.scope == registry::Scope::kDistributed;
    }
    if (!known) throw Error(ErrorCode::kNoSuchObject, fmt::format("no distributed object '{}'", target));
  }
  std::lock_guard lock(clients_mu_);
  auto& c = clients_[target];
  if (!c) c = std::make_shared<conduit::Client>(target, context_.client_options(console_policy()));
  return c;
}

// --- sessions ---

std::uint64_t Gateway::open_session(std::string operator_id, Sink sink, std::function<void()> disconnect) {
  auto s = std::make_shared<Session>();
  s->operator_id = std::move(operator_id);
  s->sink = std::move(sink);
  s->disconnect = std::move(disconnect);
  {
    std::lock_guard lock(mu_);
    s->id = next_session_++;
    sessions_[s->id] = s;
  }
  log::info("{}: session {} opened for {}", name(), s->id, s->operator_id);
  s->inbox->post([this, s] {
    json raised = json::array();
    if (events_) {
      try {
        raised = events_->invoke("alerts", {{"state", "raised"}});
      } catch (const Error& e) {
        log::warning("{}: alert snapshot: {}", name(), e.what());
      }
    }
    send(s->id, {{"kind", "alerts"}, {"alerts", raised}});
  });
  return s->id;
}

void Gateway::session_message(std::uint64_t session, const std::string& text) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session);
    if (it == sessions_.end()) return;
    s = it->second;
  }
  s->inbox->post([this, s, text] {
    json message;
    try {
      message = json::parse(text);
    } catch (const json::exception&) {
      send(s->id, {{"kind", "error"}, {"id", nullptr}, {"error", error_json(ErrorCode::kBadArgs, "not JSON")}});
      return;
    }
    handle(*s, message);
  });
}

void Gateway::handle(Session& s, const json& m) {
  json id = m.is_object() && m.contains("id") ? m["id"] : json(nullptr);
  try {
    if (!m.is_object() || !m.contains("kind") || !m["kind"].is_string()) {
      throw Error(ErrorCode::kBadArgs, "message needs a kind");
    }
    auto kind = m["kind"].get<std::string>();
    json value;
    if (kind == "subscribe") {
      subscribe(s, m);  // replies itself, ahead of the first update
      return;
    } else if (kind == "unsubscribe") {
      value = unsubscribe(s, m);
    } else if (kind == "invoke") {
      value = invoke(s, m);
    } else {
      throw Error(ErrorCode::kBadArgs, fmt::format("unknown message kind '{}'", kind));
    }
    send(s.id, {{"kind", "result"}, {"id", id}, {"value", value}});
  } catch (const Error& e) {
    send(s.id, {{"kind", "error"}, {"id", id}, {"error", error_json(e.code(), e.what())}});
  } catch (const json::exception& e) {
    send(s.id, {{"kind", "error"}, {"id", id}, {"error", error_json(ErrorCode::kBadArgs, e.what())}});
  }
}

void Gateway::subscribe(Session& s, const json& m) {
  auto target = m.at("target").get<std::string>();
  Subscription sub;
  sub.session = s.id;
  if (auto slash = target.find('/'); slash != std::string::npos) {
    sub.stream = target.substr(slash + 1);
    target = target.substr(0, slash);
    sub.mapper = m.value("stream", std::string("mapper")) == "mapper";
  } else {
    auto stream = m.value("stream", std::string("mapper"));
    if (stream != "mapper" && stream != "monitor") {
      throw Error(ErrorCode::kBadArgs, "stream must be mapper or monitor");
    }
    sub.mapper = stream == "mapper";
    sub.stream = m.at(sub.mapper ? "mapper" : "field").get<std::string>();
  }
  sub.target = target;

  auto self = conduit::format_ref(context_.self_ref(name()));
  auto client = client_for(target);
  if (sub.mapper) {
    auto reply = client->invoke("attach_mapper", {{"mapper", sub.stream}, {"subscriber", self}});
    sub.remote = reply.at("subscription").get<std::uint64_t>();
  } else {
    auto reply = client->invoke("begin_monitoring", {{"field", sub.stream},
                                                     {"precision", m.value("precision", 0.0)},
                                                     {"latency_ms", m.value("latency_ms", 100)},
                                                     {"subscriber", self}});
    sub.remote = reply.at("monitor").get<std::uint64_t>();
  }

  // The result goes out before anything routed to this subscription; both
  // happen under mu_, which also guards routing.
  std::lock_guard lock(mu_);
  if (!sessions_.count(s.id)) {
    cleanup_.post([this, sub] { release_remote(sub); });
    throw Error(ErrorCode::kAppError, "session closed");
  }
  sub.id = next_subscription_++;
  auto key = route_key(target, sub.mapper, sub.remote);
  routes_[key] = sub.id;
  subscriptions_[sub.id] = sub;
  json value = {{"subscription", sub.id}, {"target", target}, {sub.mapper ? "mapper" : "field", sub.stream}};
  send_locked(s.id, {{"kind", "result"}, {"id", m.value("id", json())}, {"value", value}});
  if (auto it = pending_.find(key); it != pending_.end()) {
    for (auto& msg : it->second.messages) {
      msg["subscription"] = sub.id;
      send_locked(s.id, msg);
    }
    pending_.erase(it);
  }
}

json Gateway::unsubscribe(Session& s, const json& m) {
  auto id = m.at("subscription").get<std::uint64_t>();
  Subscription sub;
  {
    std::lock_guard lock(mu_);
    auto it = subscriptions_.find(id);
    if (it == subscriptions_.end() || it->second.session != s.id) {
      throw Error(ErrorCode::kNoSuchObject, fmt::format("no subscription {}", id));
    }
    sub = it->second;
    subscriptions_.erase(it);
    routes_.erase(route_key(sub.target, sub.mapper, sub.remote));
  }
  release_remote(sub);
  return json{{"subscription", id}};
}

void Gateway::release_remote(const Subscription& sub) {
  try {
    auto client = client_for(sub.target);
    if (sub.mapper) {
      client->invoke("detach", {{"subscription", sub.remote}});
    } else {
      client->invoke("end_monitoring", {{"monitor", sub.remote}});
    }
  } catch (const Error& e) {
    log::debug("{}: releasing {} at {}: {}", name(), sub.stream, sub.target, e.what());
  }
}

json Gateway::invoke(Session& s, const json& m) {
  auto target = m.at("target").get<std::string>();
  auto method = m.at("method").get<std::string>();
  json args = m.value("args", json::object());
  if (!args.is_object()) throw Error(ErrorCode::kBadArgs, "args must be an object");

  if (target == services::kReservationsObject) {
    if (!context_.reservations) throw Error(ErrorCode::kAppError, "no reservation service");
    auto device = args.at("device").get<std::string>();
    if (method == "reserve") {
      auto r = context_.reservations->reserve(device, s.operator_id);
      s.tokens[device] = r.token;
      return {{"device", r.device}, {"holder", r.holder}, {"acquired_at", r.acquired_at}};
    }
    if (method == "release") {
      auto it = s.tokens.find(device);
      if (it == s.tokens.end()) {
        throw Error(ErrorCode::kBadArgs, fmt::format("{} holds no reservation on {}", s.operator_id, device));
      }
      auto token = it->second;
      s.tokens.erase(it);
      context_.reservations->release(token);
      return json(nullptr);
    }
    throw Error(ErrorCode::kNoSuchMethod, fmt::format("{}.{}", target, method));
  }
  if (target == services::kEventsObject) {
    if (!events_) throw Error(ErrorCode::kAppError, "no event service");
    if (method == "acknowledge") {
      return events_->invoke("acknowledge", {{"id", args.at("id")}, {"operator", s.operator_id}});
    }
    if (method == "alerts") return events_->invoke("alerts", args);
    throw Error(ErrorCode::kNoSuchMethod, fmt::format("{}.{}", target, method));
  }

  if (!args.contains("token") && requires_reservation(type_tag_of(target), method)) {
    if (auto it = s.tokens.find(target); it != s.tokens.end()) args["token"] = it->second;
  }
  return client_for(target)->invoke(method, args);
}

void Gateway::close_session(std::uint64_t session) {
  std::shared_ptr<Session> s;
  std::vector<Subscription> owned;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session);
    if (it == sessions_.end()) return;
    s = it->second;
    sessions_.erase(it);
    for (auto sub = subscriptions_.begin(); sub != subscriptions_.end();) {
      if (sub->second.session == session) {
        owned.push_back(sub->second);
        routes_.erase(route_key(sub->second.target, sub->second.mapper, sub->second.remote));
        sub = subscriptions_.erase(sub);
      } else {
        ++sub;
      }
    }
  }
  log::info("{}: session {} closed, releasing {} subscriptions", name(), session, owned.size());
  // The inbox may be mid-request; let it finish on its own thread.
  cleanup_.post([this, s, owned] {
    s->inbox->stop();
    for (const auto& sub : owned) release_remote(sub);
    for (const auto& [device, token] : s->tokens) {
      try {
        if (context_.reservations) context_.reservations->release(token);
      } catch (const Error&) {
      }
    }
  });
}

std::size_t Gateway::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::size_t Gateway::subscription_count() const {
  std::lock_guard lock(mu_);
  return subscriptions_.size();
}

// --- outbound ---

void Gateway::send(std::uint64_t session, const json& message) {
  std::lock_guard lock(mu_);
  send_locked(session, message);
}

void Gateway::send_locked(std::uint64_t session, const json& message) {
  auto it = sessions_.find(session);
  if (it == sessions_.end()) return;
  auto& s = it->second;
  if (!s->sink(message.dump())) {
    log::warning("{}: session {} outbox over {}; disconnecting", name(), session, outbox_limit_);
    if (s->disconnect) s->disconnect();
  }
}

void Gateway::broadcast(const json& message) {
  std::lock_guard lock(mu_);
  for (const auto& [id, _] : sessions_) send_locked(id, message);
}

void Gateway::route(const std::string& key, json message) {
  std::lock_guard lock(mu_);
  auto it = routes_.find(key);
  if (it == routes_.end()) {
    // Snapshots can beat the attach reply; hold them until the route exists.
    auto now = std::chrono::steady_clock::now();
    for (auto p = pending_.begin(); p != pending_.end();) {
      p = now - p->second.first > kPendingTtl ? pending_.erase(p) : std::next(p);
    }
    auto& p = pending_[key];
    if (p.messages.empty()) p.first = now;
    p.messages.push_back(std::move(message));
    return;
  }
  auto& sub = subscriptions_.at(it->second);
  message["subscription"] = sub.id;
  send_locked(sub.session, message);
}

void Gateway::on_record(const std::string& publisher, const std::string& mapper, std::uint64_t subscription,
                        const supervisory::Record& record) {
  json entries = json::array();
  for (const auto& [k, v] : record.entries) entries.push_back({k, to_json(v)});
  route(route_key(publisher, true, subscription), {{"kind", "update"},
                                                   {"subscription", nullptr},
                                                   {"target", publisher},
                                                   {"mapper", mapper},
                                                   {"seq", record.seq},
                                                   {"entries", entries}});
}

void Gateway::on_report(const std::string& publisher, std::uint64_t monitor, std::uint64_t seq,
                        const statusmon::StatusReport& report) {
  route(route_key(publisher, false, monitor), {{"kind", "update"},
                                               {"subscription", nullptr},
                                               {"target", publisher},
                                               {"field", report.field},
                                               {"seq", seq},
                                               {"value", to_json(report.value)},
                                               {"timestamp", report.timestamp},
                                               {"reason", report.reason == statusmon::ReportReason::kInitial
                                                              ? "initial"
                                                              : "change"}});
}

std::shared_ptr<const kernel::ProcessTemplate> gateway_template(std::optional<std::uint16_t> http_port) {
  auto t = std::make_shared<kernel::ProcessTemplate>();
  t->name = "gateway";
  t->devices.register_type("gateway", [http_port](const registry::ObjectSpec& s, kernel::ProcessContext& c) {
    if (!http_port) return std::make_shared<Gateway>(s, c);
    auto spec = s;
    spec.params["http_port"] = *http_port;
    return std::make_shared<Gateway>(spec, c);
  });
  return t;
}

}  // namespace iccs::gateway
