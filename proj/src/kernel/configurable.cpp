#include "iccs/kernel/configurable.hpp"

#include <fmt/format.h>

#include "iccs/conduit/object_ref.hpp"
#include "iccs/error.hpp"

namespace iccs::kernel {

Configurable::Configurable(std::string name, Scope scope, std::string type_tag)
    : name_(std::move(name)), scope_(scope), type_tag_(std::move(type_tag)) {
  if (!conduit::is_name_token(name_)) {
    throw Error(ErrorCode::kBadArgs, fmt::format("object name '{}' is not a name token", name_));
  }
}

bool Configurable::has_method(std::string_view method) const {
  return methods_.find(method) != methods_.end();
}

std::vector<std::string> Configurable::methods() const {
  std::vector<std::string> out;
  for (const auto& [m, _] : methods_) out.push_back(m);
  return out;
}

void Configurable::expose(std::string method, Handler handler) {
  methods_[std::move(method)] = std::move(handler);
}

json Configurable::call(const std::string& method, const json& args) {
  auto it = methods_.find(method);
  if (it == methods_.end()) {
    throw Error(ErrorCode::kNoSuchMethod, fmt::format("{} has no method '{}'", name_, method));
  }
  try {
    return it->second(args);
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}.{}: {}", name_, method, e.what()));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kAppError, fmt::format("{}.{}: {}", name_, method, e.what()));
  }
}

}  // namespace iccs::kernel
