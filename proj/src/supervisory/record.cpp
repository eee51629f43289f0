#include "iccs/supervisory/record.hpp"

#include <set>

#include "iccs/error.hpp"

namespace iccs::supervisory {

json to_json(const Record& r) {
  json entries = json::array();
  for (const auto& [k, v] : r.entries) entries.push_back(json::array({k, iccs::to_json(v)}));
  return {{"seq", r.seq}, {"entries", std::move(entries)}};
}

Record record_from_json(const json& j) {
  Record r;
  try {
    r.seq = j.at("seq").get<std::uint64_t>();
    std::set<std::string> keys;
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::kBadArgs, "record entry must be [key, value]");
      auto key = e[0].get<std::string>();
      if (!keys.insert(key).second) throw Error(ErrorCode::kBadArgs, "duplicate record key " + key);
      r.entries.emplace_back(std::move(key), field_value_from_json(e[1]));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadArgs, std::string("malformed record: ") + e.what());
  }
  return r;
}

}  // namespace iccs::supervisory
