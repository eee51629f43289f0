#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "iccs/value.hpp"

namespace iccs::supervisory {

using Entries = std::vector<std::pair<std::string, FieldValue>>;

/// One publication of a data mapper. Entry order is fixed by the mapper.
struct Record {
  std::uint64_t seq = 0;
  Entries entries;

  friend bool operator==(const Record&, const Record&) = default;
};

/// {"seq": n, "entries": [[key, value], ...]}
json to_json(const Record& r);
Record record_from_json(const json& j);  // BAD_ARGS

}  // namespace iccs::supervisory
