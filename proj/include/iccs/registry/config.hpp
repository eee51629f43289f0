#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iccs/value.hpp"

namespace iccs::registry {

enum class Category { kFep, kSupervisor, kGateway };
enum class Scope { kLocal, kDistributed };

std::string_view to_string(Category c);
std::string_view to_string(Scope s);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0: ephemeral, assigned at boot
};

struct ObjectSpec {
  std::string name;
  Scope scope = Scope::kDistributed;
  std::string type_tag;
  json params = json::object();

  /// Names listed under params.controllers (empty when absent).
  std::vector<std::string> controller_bindings() const;
};

inline constexpr std::size_t kDefaultWorkerCount = 4;

struct ProcessSpec {
  std::string name;
  Category category = Category::kFep;
  /// Selects the factory registrations the process boots with.
  std::string template_name;
  Endpoint endpoint;
  std::size_t worker_count = kDefaultWorkerCount;
  std::vector<ObjectSpec> objects;
};

struct FacilityConfig {
  std::string facility_name;
  /// Where the system manager, registry and shared services listen.
  Endpoint central{"127.0.0.1", 7000};
  Millis heartbeat_period{500};
  int missed_limit = 3;
  std::vector<ProcessSpec> processes;

  const ProcessSpec* find_process(std::string_view name) const;
  /// The process declaring `object`, or nullptr.
  const ProcessSpec* owner_of(std::string_view object) const;
  const ObjectSpec* find_object(std::string_view object) const;
};

/// Parses and validates; BAD_ARGS names the first violated rule.
FacilityConfig parse_config(const json& document);
FacilityConfig load_config(const std::filesystem::path& path);
json to_json(const FacilityConfig& config);
json to_json(const ObjectSpec& spec);
ObjectSpec object_spec_from_json(const json& j);

}  // namespace iccs::registry
