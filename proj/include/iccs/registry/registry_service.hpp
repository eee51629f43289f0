#pragma once

#include <memory>
#include <mutex>

#include "iccs/conduit/client.hpp"
#include "iccs/kernel/configurable.hpp"
#include "iccs/registry/config.hpp"
#include "iccs/registry/name_service.hpp"

namespace iccs::registry {

inline constexpr const char* kRegistryObject = "__registry";

/// `__registry`: the name service and the facility configuration database.
/// Methods: register, resolve, wait_for, manifest_for, config, entries.
class RegistryService : public kernel::Configurable {
 public:
  RegistryService(std::shared_ptr<NameService> names, FacilityConfig config);
  bool reentrant() const override { return true; }

  /// Declaration-ordered objects of `process`; NO_SUCH_OBJECT if unknown.
  std::vector<ObjectSpec> manifest_for(const std::string& process) const;
  const FacilityConfig& config() const { return config_; }

 private:
  std::shared_ptr<NameService> names_;
  FacilityConfig config_;
};

/// Conduit client for `__registry`; doubles as the resolver used by
/// policy-driven clients.
class RegistryClient : public conduit::Resolver {
 public:
  RegistryClient(conduit::ObjectRef registry, conduit::ConnectionPolicy policy = {});

  void register_name(const std::string& object, const conduit::ObjectRef& ref);
  conduit::ObjectRef resolve(const std::string& object) override;
  conduit::ObjectRef wait_for(const std::string& object, Millis timeout) override;
  std::vector<ObjectSpec> manifest_for(const std::string& process);
  FacilityConfig config();
  std::vector<NameEntry> entries();

  const conduit::ObjectRef& ref() const { return ref_; }

 private:
  conduit::ObjectRef ref_;
  conduit::ConnectionPolicy policy_;
  conduit::Client client_;
};

}  // namespace iccs::registry
