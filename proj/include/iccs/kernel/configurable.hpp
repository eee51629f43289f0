#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "iccs/registry/config.hpp"
#include "iccs/value.hpp"

namespace iccs::kernel {

using registry::Scope;

/// An object created at boot from the configuration manifest. Local ones are
/// private to their process; distributed ones are exported over the wire.
class Configurable {
 public:
  using Handler = std::function<json(const json& args)>;

  Configurable(std::string name, Scope scope, std::string type_tag);
  virtual ~Configurable() = default;

  Configurable(const Configurable&) = delete;
  Configurable& operator=(const Configurable&) = delete;

  const std::string& name() const { return name_; }
  Scope scope() const { return scope_; }
  const std::string& type_tag() const { return type_tag_; }

  bool has_method(std::string_view method) const;
  std::vector<std::string> methods() const;

  /// Runs a handler. NO_SUCH_METHOD when absent; JSON access errors inside
  /// the handler become BAD_ARGS, other exceptions APP_ERROR.
  json call(const std::string& method, const json& args);

  /// Reentrant objects may run several handlers at once; others are serialized.
  virtual bool reentrant() const { return false; }
  /// Called once the process dispatcher is serving requests.
  virtual void on_ready() {}
  /// Called before the process stops serving.
  virtual void on_shutdown() {}

 protected:
  void expose(std::string method, Handler handler);

 private:
  std::string name_;
  Scope scope_;
  std::string type_tag_;
  std::map<std::string, Handler, std::less<>> methods_;
};

}  // namespace iccs::kernel
