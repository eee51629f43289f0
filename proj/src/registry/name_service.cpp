#include "iccs/registry/name_service.hpp"

#include <fmt/format.h>

#include "iccs/error.hpp"

namespace iccs::registry {

void NameService::register_name(const std::string& object, const conduit::ObjectRef& ref) {
  if (!conduit::is_name_token(object)) {
    throw Error(ErrorCode::kBadArgs, fmt::format("'{}' is not a name token", object));
  }
  std::lock_guard lock(mu_);
  table_[object] = NameEntry{object, ref, now_ms()};
  cv_.notify_all();
}

conduit::ObjectRef NameService::resolve(const std::string& object) const {
  std::lock_guard lock(mu_);
  auto it = table_.find(object);
  if (it == table_.end()) {
    throw Error(ErrorCode::kNoSuchObject, fmt::format("no object named '{}'", object));
  }
  return it->second.ref;
}

conduit::ObjectRef NameService::wait_for(const std::string& object, Millis timeout) const {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return table_.count(object) > 0; })) {
    throw Error(ErrorCode::kTimeout,
                fmt::format("'{}' not registered within {} ms", object, timeout.count()));
  }
  return table_.at(object).ref;
}

std::size_t NameService::remove_process(const std::string& process) {
  std::lock_guard lock(mu_);
  return std::erase_if(table_, [&](const auto& kv) { return kv.second.ref.process == process; });
}

bool NameService::remove(const std::string& object) {
  std::lock_guard lock(mu_);
  return table_.erase(object) > 0;
}

std::vector<NameEntry> NameService::entries() const {
  std::lock_guard lock(mu_);
  std::vector<NameEntry> out;
  for (const auto& [_, e] : table_) out.push_back(e);
  return out;
}

}  // namespace iccs::registry
