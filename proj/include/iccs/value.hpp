#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <variant>

#include <json.hpp>

namespace iccs {

using json = nlohmann::json;

/// The three value kinds that travel in records and status reports.
using FieldValue = std::variant<double, std::string, bool>;

json to_json(const FieldValue& value);
FieldValue field_value_from_json(const json& j);  // throws BAD_ARGS
bool is_numeric(const FieldValue& value);

/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;
Timestamp now_ms();

using Millis = std::chrono::milliseconds;

}  // namespace iccs
