#include "iccs/kernel/factory.hpp"

#include <fmt/format.h>

#include "iccs/conduit/object_ref.hpp"

namespace iccs::kernel {

std::shared_ptr<Configurable> ProcessContext::find(std::string_view name) const {
  return host ? host->find(name) : nullptr;
}

conduit::ClientOptions ProcessContext::client_options() const {
  return client_options(default_policy);
}

conduit::ClientOptions ProcessContext::client_options(
    const conduit::ConnectionPolicy& policy) const {
  return conduit::ClientOptions{policy, resolver, outbound};
}

conduit::ObjectRef ProcessContext::self_ref(const std::string& object) const {
  if (!host) throw Error(ErrorCode::kAppError, "process context has no host");
  return host->ref_for(object);
}

void throw_missing_binding(std::string_view name, std::string_view process) {
  throw Error(ErrorCode::kBadArgs,
              fmt::format("{}: no suitable object '{}' to bind", process, name));
}

void Factory::register_type(const std::string& type_tag, Constructor constructor) {
  if (!conduit::is_name_token(type_tag)) {
    throw Error(ErrorCode::kBadArgs, fmt::format("type tag '{}' is not a name token", type_tag));
  }
  if (!constructors_.emplace(type_tag, std::move(constructor)).second) {
    throw Error(ErrorCode::kBadArgs, fmt::format("type tag '{}' already registered", type_tag));
  }
}

bool Factory::knows(std::string_view type_tag) const {
  return constructors_.find(type_tag) != constructors_.end();
}

std::vector<std::string> Factory::type_tags() const {
  std::vector<std::string> out;
  for (const auto& [tag, _] : constructors_) out.push_back(tag);
  return out;
}

std::shared_ptr<Configurable> Factory::construct(const registry::ObjectSpec& spec,
                                                 ProcessContext& context) const {
  if (spec.scope != scope_) {
    throw Error(ErrorCode::kBadArgs,
                fmt::format("{} is {} but this factory builds {} objects", spec.name,
                            registry::to_string(spec.scope), registry::to_string(scope_)));
  }
  auto it = constructors_.find(spec.type_tag);
  if (it == constructors_.end()) {
    throw Error(ErrorCode::kBadArgs,
                fmt::format("{}: unknown type_tag '{}'", spec.name, spec.type_tag));
  }
  auto object = it->second(spec, context);
  if (!object || object->name() != spec.name || object->scope() != spec.scope) {
    throw Error(ErrorCode::kAppError,
                fmt::format("constructor for '{}' returned a mismatched object", spec.type_tag));
  }
  return object;
}

}  // namespace iccs::kernel
