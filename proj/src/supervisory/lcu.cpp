#include "iccs/supervisory/lcu.hpp"

#include <fmt/format.h>

#include "iccs/logging.hpp"
#include "iccs/services/interfaces.hpp"

namespace iccs::supervisory {

struct Lcu::Subscription {
  std::uint64_t id = 0;
  std::string mapper;
  conduit::ObjectRef subscriber;
  int max_failures = 1;
  std::unique_ptr<conduit::Client> client;
  std::unique_ptr<kernel::SerialWorker> worker;
  int failures = 0;  // worker thread only
  std::atomic<bool> dead{false};
};

conduit::ConnectionPolicy default_delivery_policy() {
  conduit::ConnectionPolicy p;
  p.max_attempts = 3;
  p.call_timeout = Millis(1000);
  return p;
}

Entries project_keys(const json& state, const std::vector<std::string>& keys) {
  Entries out;
  for (const auto& k : keys) {
    if (!state.is_object() || !state.contains(k)) continue;
    const auto& v = state[k];
    if (v.is_number() || v.is_string() || v.is_boolean()) out.emplace_back(k, field_value_from_json(v));
  }
  return out;
}

Lcu::Lcu(const registry::ObjectSpec& spec, kernel::ProcessContext& context, json initial_state)
    : Director(spec.name, spec.scope, spec.type_tag),
      context_(context),
      state_(std::move(initial_state)) {
  expose("attach_mapper", [this](const json& a) {
    std::optional<conduit::ConnectionPolicy> policy;
    if (a.contains("policy")) policy = conduit::ConnectionPolicy::from_json(a["policy"]);
    auto att = attach_mapper(a.at("mapper").get<std::string>(),
                             conduit::parse_ref(a.at("subscriber").get<std::string>()), policy);
    return json{{"subscription", att.subscription}, {"seq", att.seq}};
  });
  expose("detach", [this](const json& a) {
    detach(a.at("subscription").get<std::uint64_t>());
    return json(nullptr);
  });
  expose("mappers", [this](const json&) { return json(mappers()); });
}

Lcu::~Lcu() { on_shutdown(); }

void Lcu::add_mapper(std::string name, Projection projection) {
  std::lock_guard lock(mu_);
  Mapper m{std::move(projection), {}};
  m.last.entries = m.projection(state_);
  mappers_[std::move(name)] = std::move(m);
}

std::vector<std::string> Lcu::mappers() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, _] : mappers_) out.push_back(name);
  return out;
}

Record Lcu::last_published(const std::string& mapper) const {
  std::lock_guard lock(mu_);
  auto it = mappers_.find(mapper);
  if (it == mappers_.end()) throw Error(ErrorCode::kNoSuchObject, fmt::format("no mapper '{}'", mapper));
  return it->second.last;
}

std::size_t Lcu::subscriber_count(const std::string& mapper) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, s] : subscriptions_) n += s->mapper == mapper ? 1 : 0;
  return n;
}

Lcu::Attachment Lcu::attach_mapper(const std::string& mapper, const conduit::ObjectRef& subscriber,
                                   std::optional<conduit::ConnectionPolicy> policy) {
  auto sub = std::make_shared<Subscription>();
  auto p = policy.value_or(default_delivery_policy());
  sub->mapper = mapper;
  sub->subscriber = subscriber;
  sub->max_failures = p.max_attempts;
  // Each delivery is one attempt; max_attempts counts consecutive failed deliveries.
  p.max_attempts = 1;
  sub->client = std::make_unique<conduit::Client>(subscriber, context_.client_options(p));
  sub->worker = std::make_unique<kernel::SerialWorker>(1024);

  std::lock_guard lock(mu_);
  auto it = mappers_.find(mapper);
  if (it == mappers_.end()) {
    throw Error(ErrorCode::kNoSuchObject, fmt::format("{} has no mapper '{}'", name(), mapper));
  }
  sub->id = next_subscription_++;
  subscriptions_[sub->id] = sub;
  deliver(sub, it->second.last);
  return Attachment{sub->id, it->second.last.seq};
}

void Lcu::detach(std::uint64_t subscription) {
  std::shared_ptr<Subscription> sub;
  {
    std::lock_guard lock(mu_);
    auto it = subscriptions_.find(subscription);
    if (it == subscriptions_.end()) {
      throw Error(ErrorCode::kNoSuchObject, fmt::format("{}: no subscription {}", name(), subscription));
    }
    sub = it->second;
    subscriptions_.erase(it);
  }
  sub->dead = true;
  sub->worker->stop();
}

void Lcu::evolve(const json& delta) {
  if (!delta.is_object()) throw Error(ErrorCode::kBadArgs, "delta must be an object");
  std::lock_guard lock(mu_);
  json candidate = state_;
  candidate.merge_patch(delta);
  try {
    validate(candidate);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kAppError, fmt::format("{} rejected delta: {}", name(), e.what()));
  }
  state_ = std::move(candidate);
  for (auto& [mapper_name, m] : mappers_) {
    auto entries = m.projection(state_);
    if (entries == m.last.entries) continue;
    m.last = Record{m.last.seq + 1, std::move(entries)};
    for (auto& [_, sub] : subscriptions_) {
      if (sub->mapper == mapper_name) deliver(sub, m.last);
    }
  }
}

// Called with mu_ held, so per-subscription order follows publication order.
void Lcu::deliver(const std::shared_ptr<Subscription>& sub, const Record& record) {
  json message = {{"publisher", name()},
                  {"mapper", sub->mapper},
                  {"subscription", sub->id},
                  {"record", to_json(record)}};
  std::weak_ptr<Subscription> weak = sub;
  sub->worker->post([this, weak, message = std::move(message)] {
    auto s = weak.lock();
    if (!s || s->dead) return;
    try {
      s->client->invoke("update", message);
      ++deliveries_;
      s->failures = 0;
    } catch (const Error& e) {
      if (++s->failures >= s->max_failures) {
        drop_subscriber(s->id, e.what());
      } else {
        log::warning("{}: delivery to {} failed ({}/{}): {}", name(),
                     conduit::format_ref(s->subscriber), s->failures, s->max_failures, e.what());
      }
    }
  });
}

// Runs on the failing subscription's own worker; the subscription is parked,
// not destroyed, until shutdown.
void Lcu::drop_subscriber(std::uint64_t id, const std::string& why) {
  std::shared_ptr<Subscription> sub;
  {
    std::lock_guard lock(mu_);
    auto it = subscriptions_.find(id);
    if (it == subscriptions_.end()) return;
    sub = it->second;
    subscriptions_.erase(it);
    retired_.push_back(sub);
  }
  sub->dead = true;
  auto target = conduit::format_ref(sub->subscriber);
  log::warning("{}: detached unreachable subscriber {} from {}: {}", name(), target, sub->mapper, why);
  if (context_.events) {
    try {
      context_.events->raise_alert("subscriber_detached", name(),
                                   {{"subscriber", target}, {"mapper", sub->mapper}, {"reason", why}},
                                   services::AlertSeverity::kWarning);
    } catch (const Error& e) {
      log::warning("{}: could not raise alert: {}", name(), e.what());
    }
  }
}

bool Lcu::flush(Millis timeout) {
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lock(mu_);
    for (auto& [_, s] : subscriptions_) subs.push_back(s);
  }
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (auto& s : subs) {
    auto left = std::chrono::duration_cast<Millis>(deadline - std::chrono::steady_clock::now());
    if (!s->worker->drain(std::max(left, Millis(0)))) return false;
  }
  return true;
}

void Lcu::on_shutdown() {
  std::map<std::uint64_t, std::shared_ptr<Subscription>> subs;
  std::vector<std::shared_ptr<Subscription>> retired;
  {
    std::lock_guard lock(mu_);
    subs.swap(subscriptions_);
    retired.swap(retired_);
  }
  for (auto& [_, s] : subs) {
    s->dead = true;
    s->worker->stop();
  }
  for (auto& s : retired) s->worker->stop();
}

GenericLcu::GenericLcu(const registry::ObjectSpec& spec, kernel::ProcessContext& context)
    : Lcu(spec, context, spec.params.value("state", json::object())) {
  const json mappers = spec.params.value("mappers", json::object());
  for (const auto& [mapper, keys] : mappers.items()) {
    add_mapper(mapper, [keys = keys.get<std::vector<std::string>>()](const json& state) {
      return project_keys(state, keys);
    });
  }
  readonly_ = spec.params.value("readonly", std::vector<std::string>{});
  initial_ = spec.params.value("state", json::object());
  expose("evolve", [this](const json& a) {
    evolve(a.at("delta"));
    return json(nullptr);
  });
}

void GenericLcu::validate(const json& candidate) const {
  for (const auto& key : readonly_) {
    if (candidate.value(key, json()) != initial_.value(key, json())) {
      throw Error(ErrorCode::kAppError, fmt::format("{}: '{}' is read-only", name(), key));
    }
  }
}

}  // namespace iccs::supervisory
