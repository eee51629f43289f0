#include "iccs/registry/registry_service.hpp"

#include <fmt/format.h>

namespace iccs::registry {

namespace {

json entry_json(const NameEntry& e) {
  return {{"object", e.object}, {"ref", conduit::format_ref(e.ref)},
          {"registered_at", e.registered_at}};
}

}  // namespace

RegistryService::RegistryService(std::shared_ptr<NameService> names, FacilityConfig config)
    : Configurable(kRegistryObject, Scope::kDistributed, "registry"),
      names_(std::move(names)),
      config_(std::move(config)) {
  expose("register", [this](const json& a) {
    auto object = a.at("object").get<std::string>();
    if (const auto* spec = config_.find_object(object); spec && spec->scope == Scope::kLocal) {
      throw Error(ErrorCode::kBadArgs, fmt::format("'{}' is process-local", object));
    }
    names_->register_name(object, conduit::parse_ref(a.at("ref").get<std::string>()));
    return json(nullptr);
  });
  expose("resolve", [this](const json& a) {
    return json{{"ref", conduit::format_ref(names_->resolve(a.at("object").get<std::string>()))}};
  });
  expose("wait_for", [this](const json& a) {
    auto ref = names_->wait_for(a.at("object").get<std::string>(),
                                Millis(a.value("timeout_ms", 1000)));
    return json{{"ref", conduit::format_ref(ref)}};
  });
  expose("manifest_for", [this](const json& a) {
    json out = json::array();
    for (const auto& spec : manifest_for(a.at("process").get<std::string>())) {
      out.push_back(to_json(spec));
    }
    return out;
  });
  expose("config", [this](const json&) { return to_json(config_); });
  expose("entries", [this](const json&) {
    json out = json::array();
    for (const auto& e : names_->entries()) out.push_back(entry_json(e));
    return out;
  });
}

std::vector<ObjectSpec> RegistryService::manifest_for(const std::string& process) const {
  const auto* p = config_.find_process(process);
  if (!p) throw Error(ErrorCode::kNoSuchObject, fmt::format("no process '{}' in config", process));
  return p->objects;
}

RegistryClient::RegistryClient(conduit::ObjectRef registry, conduit::ConnectionPolicy policy)
    : ref_(registry), policy_(policy), client_(std::move(registry), {policy, {}, {}}) {}

void RegistryClient::register_name(const std::string& object, const conduit::ObjectRef& ref) {
  client_.invoke("register", {{"object", object}, {"ref", conduit::format_ref(ref)}});
}

conduit::ObjectRef RegistryClient::resolve(const std::string& object) {
  return conduit::parse_ref(client_.invoke("resolve", {{"object", object}}).at("ref").get<std::string>());
}

conduit::ObjectRef RegistryClient::wait_for(const std::string& object, Millis timeout) {
  // The server holds the call open for `timeout`; give the reply room to arrive.
  auto policy = policy_;
  policy.call_timeout = timeout + policy_.call_timeout;
  conduit::Client waiter(ref_, {policy, {}, {}});
  auto reply = waiter.invoke("wait_for", {{"object", object}, {"timeout_ms", timeout.count()}});
  return conduit::parse_ref(reply.at("ref").get<std::string>());
}

std::vector<ObjectSpec> RegistryClient::manifest_for(const std::string& process) {
  std::vector<ObjectSpec> out;
  for (const auto& j : client_.invoke("manifest_for", {{"process", process}})) {
    out.push_back(object_spec_from_json(j));
  }
  return out;
}

FacilityConfig RegistryClient::config() { return parse_config(client_.invoke("config")); }

std::vector<NameEntry> RegistryClient::entries() {
  std::vector<NameEntry> out;
  for (const auto& j : client_.invoke("entries")) {
    out.push_back(NameEntry{j.at("object").get<std::string>(),
                            conduit::parse_ref(j.at("ref").get<std::string>()),
                            j.value("registered_at", Timestamp{0})});
  }
  return out;
}

}  // namespace iccs::registry
