#include "iccs/registry/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "iccs/conduit/object_ref.hpp"
#include "iccs/error.hpp"

namespace iccs::registry {

using conduit::is_name_token;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kFep: return "fep";
    case Category::kSupervisor: return "supervisor";
    case Category::kGateway: return "gateway";
  }
  return "fep";
}

std::string_view to_string(Scope s) { return s == Scope::kLocal ? "local" : "distributed"; }

std::vector<std::string> ObjectSpec::controller_bindings() const {
  std::vector<std::string> out;
  if (params.is_object() && params.contains("controllers") && params["controllers"].is_array()) {
    for (const auto& c : params["controllers"]) {
      if (c.is_string()) out.push_back(c.get<std::string>());
    }
  }
  return out;
}

const ProcessSpec* FacilityConfig::find_process(std::string_view name) const {
  for (const auto& p : processes) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const ProcessSpec* FacilityConfig::owner_of(std::string_view object) const {
  for (const auto& p : processes) {
    for (const auto& o : p.objects) {
      if (o.name == object) return &p;
    }
  }
  return nullptr;
}

const ObjectSpec* FacilityConfig::find_object(std::string_view object) const {
  for (const auto& p : processes) {
    for (const auto& o : p.objects) {
      if (o.name == object) return &o;
    }
  }
  return nullptr;
}

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::kBadArgs, why); }

std::string token(const json& j, const char* key, std::string_view where) {
  if (!j.contains(key) || !j[key].is_string()) invalid(fmt::format("{}: missing {}", where, key));
  auto s = j[key].get<std::string>();
  if (!is_name_token(s)) invalid(fmt::format("{}: {} '{}' is not a name token", where, key, s));
  return s;
}

Endpoint endpoint_from(const json& j, std::string_view where) {
  if (!j.is_object()) invalid(fmt::format("{}: endpoint must be an object", where));
  Endpoint e;
  e.host = j.value("host", e.host);
  if (!is_name_token(e.host)) invalid(fmt::format("{}: bad endpoint host", where));
  if (j.contains("port")) {
    if (!j["port"].is_number_integer()) invalid(fmt::format("{}: port must be an integer", where));
    auto port = j["port"].get<long long>();
    if (port < 0 || port > 65535) invalid(fmt::format("{}: port out of range", where));
    e.port = static_cast<std::uint16_t>(port);
  }
  return e;
}

json endpoint_json(const Endpoint& e) { return {{"host", e.host}, {"port", e.port}}; }

Category category_from(const std::string& s, std::string_view where) {
  if (s == "fep") return Category::kFep;
  if (s == "supervisor") return Category::kSupervisor;
  if (s == "gateway") return Category::kGateway;
  invalid(fmt::format("{}: unknown category '{}'", where, s));
}

}  // namespace

ObjectSpec object_spec_from_json(const json& j) {
  if (!j.is_object()) invalid("object spec must be an object");
  ObjectSpec o;
  o.name = token(j, "name", "object");
  std::string where = fmt::format("object {}", o.name);
  o.type_tag = token(j, "type_tag", where);
  auto scope = j.value("scope", std::string("distributed"));
  if (scope == "local") {
    o.scope = Scope::kLocal;
  } else if (scope == "distributed") {
    o.scope = Scope::kDistributed;
  } else {
    invalid(fmt::format("{}: scope must be local or distributed", where));
  }
  o.params = j.value("params", json::object());
  if (!o.params.is_object()) invalid(fmt::format("{}: params must be an object", where));
  return o;
}

FacilityConfig parse_config(const json& doc) {
  if (!doc.is_object()) invalid("config must be a JSON object");
  FacilityConfig c;
  try {
    c.facility_name = doc.value("facility", std::string("facility"));
    if (doc.contains("central")) c.central = endpoint_from(doc["central"], "central");
    c.heartbeat_period = Millis(doc.value("heartbeat_ms", c.heartbeat_period.count()));
    c.missed_limit = doc.value("missed_limit", c.missed_limit);
  } catch (const json::exception& e) {
    invalid(fmt::format("bad facility settings: {}", e.what()));
  }
  if (c.heartbeat_period.count() <= 0) invalid("heartbeat_ms must be > 0");
  if (c.missed_limit < 1) invalid("missed_limit must be >= 1");

  if (!doc.contains("processes") || !doc["processes"].is_array()) invalid("missing processes list");

  std::set<std::string> process_names;
  std::set<std::pair<std::string, std::uint16_t>> endpoints;
  std::set<std::string> global_names;
  for (const auto& pj : doc["processes"]) {
    if (!pj.is_object()) invalid("process entry must be an object");
    ProcessSpec p;
    p.name = token(pj, "name", "process");
    std::string where = fmt::format("process {}", p.name);
    if (!process_names.insert(p.name).second) invalid(fmt::format("duplicate process '{}'", p.name));
    p.category = category_from(pj.value("category", std::string()), where);
    p.template_name = pj.contains("template") ? token(pj, "template", where) : std::string();
    if (pj.contains("endpoint")) p.endpoint = endpoint_from(pj["endpoint"], where);
    if (p.endpoint.port != 0 && !endpoints.emplace(p.endpoint.host, p.endpoint.port).second) {
      invalid(fmt::format("duplicate endpoint {}:{} ({})", p.endpoint.host, p.endpoint.port, p.name));
    }
    if (pj.contains("worker_count")) {
      const auto& w = pj["worker_count"];
      if (!w.is_number_integer() || w.get<long long>() < 1) {
        invalid(fmt::format("{}: worker_count must be >= 1", where));
      }
      p.worker_count = w.get<std::size_t>();
    }

    std::set<std::string> local_names;
    std::set<std::string> object_names;
    if (pj.contains("objects")) {
      if (!pj["objects"].is_array()) invalid(fmt::format("{}: objects must be a list", where));
      for (const auto& oj : pj["objects"]) {
        ObjectSpec o = object_spec_from_json(oj);
        if (!object_names.insert(o.name).second) {
          invalid(fmt::format("{}: duplicate object '{}'", where, o.name));
        }
        if (o.scope == Scope::kDistributed && !global_names.insert(o.name).second) {
          invalid(fmt::format("duplicate distributed object '{}'", o.name));
        }
        if (o.scope == Scope::kLocal) local_names.insert(o.name);
        p.objects.push_back(std::move(o));
      }
    }
    for (const auto& o : p.objects) {
      if (o.params.contains("controllers") && !o.params["controllers"].is_array()) {
        invalid(fmt::format("{}: object {}: controllers must be a list", where, o.name));
      }
      for (const auto& ctl : o.controller_bindings()) {
        if (!local_names.count(ctl)) {
          invalid(fmt::format("{}: object {} binds missing controller '{}'", where, o.name, ctl));
        }
      }
    }
    c.processes.push_back(std::move(p));
  }
  // Local names may repeat across processes, but never shadow a global name.
  for (const auto& p : c.processes) {
    for (const auto& o : p.objects) {
      if (o.scope == Scope::kLocal && global_names.count(o.name)) {
        invalid(fmt::format("local object '{}' in {} collides with a distributed name", o.name, p.name));
      }
    }
  }
  return c;
}

FacilityConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid(fmt::format("cannot open config '{}'", path.string()));
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) invalid(fmt::format("config '{}' is not valid JSON", path.string()));
  return parse_config(doc);
}

json to_json(const ObjectSpec& o) {
  return {{"name", o.name}, {"scope", to_string(o.scope)}, {"type_tag", o.type_tag},
          {"params", o.params}};
}

json to_json(const FacilityConfig& c) {
  json processes = json::array();
  for (const auto& p : c.processes) {
    json objects = json::array();
    for (const auto& o : p.objects) objects.push_back(to_json(o));
    json pj = {{"name", p.name},
               {"category", to_string(p.category)},
               {"endpoint", endpoint_json(p.endpoint)},
               {"worker_count", p.worker_count},
               {"objects", objects}};
    if (!p.template_name.empty()) pj["template"] = p.template_name;
    processes.push_back(pj);
  }
  return {{"facility", c.facility_name},
          {"central", endpoint_json(c.central)},
          {"heartbeat_ms", c.heartbeat_period.count()},
          {"missed_limit", c.missed_limit},
          {"processes", processes}};
}

}  // namespace iccs::registry
