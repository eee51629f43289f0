#include "iccs/kernel/host.hpp"

#include <unistd.h>

#include <fmt/format.h>

#include "iccs/logging.hpp"

namespace iccs::kernel {

namespace {

class FaultObject : public Configurable {
 public:
  explicit FaultObject(Host& host) : Configurable(kFaultObject, Scope::kDistributed, "fault") {
    expose("set", [&host](const json& args) {
      host.apply_fault(args);
      return json(nullptr);
    });
    expose("clear", [&host](const json&) {
      host.clear_faults();
      return json(nullptr);
    });
  }
  bool reentrant() const override { return true; }
};

}  // namespace

Host::Host(HostOptions options)
    : options_(std::move(options)),
      server_(options_.host, options_.port),
      queue_(options_.workers) {
  crash_handler_ = [] { ::_exit(70); };
  add(std::make_shared<FaultObject>(*this));
}

Host::~Host() {
  stop();
  for (auto& t : deferred_) {
    if (t.joinable()) t.join();
  }
}

conduit::ObjectRef Host::ref_for(const std::string& object) const {
  return conduit::ObjectRef{options_.host, port(), options_.process, object};
}

void Host::add(std::shared_ptr<Configurable> object) {
  std::lock_guard lock(mu_);
  auto name = object->name();
  if (!objects_.emplace(name, std::move(object)).second) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: duplicate object '{}'", process(), name));
  }
}

bool Host::remove(const std::string& name) {
  std::lock_guard lock(mu_);
  return objects_.erase(name) > 0;
}

std::shared_ptr<Configurable> Host::find(std::string_view name) const {
  std::lock_guard lock(mu_);
  auto it = objects_.find(name);
  return it == objects_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<Configurable>> Host::objects() const {
  std::lock_guard lock(mu_);
  std::vector<std::shared_ptr<Configurable>> out;
  for (const auto& [_, o] : objects_) out.push_back(o);
  return out;
}

void Host::start() {
  if (running_) return;
  running_ = true;
  server_.start([this](conduit::Envelope call, conduit::Server::Responder respond) {
    dispatch(std::move(call), std::move(respond));
  });
}

void Host::stop() {
  if (!running_) return;
  running_ = false;
  server_.stop();
  queue_.stop();
}

void Host::set_crash_handler(std::function<void()> handler) {
  std::lock_guard lock(mu_);
  crash_handler_ = std::move(handler);
}

void Host::apply_fault(const json& fault) {
  if (!fault.is_object()) throw Error(ErrorCode::kBadArgs, "fault must be an object");
  if (fault.contains("reply_delay_ms")) {
    server_.set_reply_delay(Millis(fault["reply_delay_ms"].get<long long>()));
  }
  // One-shot actions run after the acknowledging reply has gone out.
  bool drop = fault.value("drop_connections", false);
  bool crash = fault.value("crash", false);
  if (!drop && !crash) return;
  log::warning("fault injected: {}", fault.dump());
  std::lock_guard lock(mu_);
  auto handler = crash_handler_;
  deferred_.emplace_back([this, drop, crash, handler] {
    std::this_thread::sleep_for(Millis(20));
    if (drop) server_.drop_connections();
    if (crash && handler) handler();
  });
}

void Host::clear_faults() { server_.set_reply_delay(Millis(0)); }

void Host::dispatch(conduit::Envelope call, conduit::Server::Responder respond) {
  using conduit::Envelope;
  if (call.method == conduit::kPingMethod) {
    respond(Envelope::ok(call.id, nullptr));
    return;
  }
  auto object = find(call.object);
  if (!object || object->scope() == Scope::kLocal) {
    respond(Envelope::failure(call.id, ErrorCode::kNoSuchObject,
                              fmt::format("{} hosts no object '{}'", process(), call.object)));
    return;
  }
  incoming_->record(call.method);
  auto key = call.object;
  bool serialize = !object->reentrant();
  queue_.submit(std::move(key), serialize,
                [object = std::move(object), call = std::move(call),
                 respond = std::move(respond)]() mutable {
                  try {
                    respond(Envelope::ok(call.id, object->call(call.method, call.args)));
                  } catch (const Error& e) {
                    respond(Envelope::failure(call.id, e.code(), e.what()));
                  } catch (const std::exception& e) {
                    respond(Envelope::failure(call.id, ErrorCode::kAppError, e.what()));
                  }
                });
}

}  // namespace iccs::kernel
