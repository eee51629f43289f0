#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "iccs/kernel/configurable.hpp"
#include "iccs/kernel/context.hpp"
#include "iccs/registry/config.hpp"

namespace iccs::kernel {

using Constructor =
    std::function<std::shared_ptr<Configurable>(const registry::ObjectSpec&, ProcessContext&)>;

/// Builds configurables of one scope by type tag.
class Factory {
 public:
  explicit Factory(Scope scope) : scope_(scope) {}

  Scope scope() const { return scope_; }

  /// BAD_ARGS when the tag is already registered or not a name token.
  void register_type(const std::string& type_tag, Constructor constructor);
  bool knows(std::string_view type_tag) const;
  std::vector<std::string> type_tags() const;

  /// BAD_ARGS for an unknown tag or a spec of the other scope.
  std::shared_ptr<Configurable> construct(const registry::ObjectSpec& spec,
                                          ProcessContext& context) const;

 private:
  Scope scope_;
  std::map<std::string, Constructor, std::less<>> constructors_;
};

}  // namespace iccs::kernel
