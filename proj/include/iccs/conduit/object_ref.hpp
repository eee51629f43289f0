#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace iccs::conduit {

/// True when `text` is a nonempty run of [A-Za-z0-9_.-].
bool is_name_token(std::string_view text);

/// Location-transparent handle to a named distributed object.
/// Canonical text form: ref://<host>:<port>/<process>/<object>
struct ObjectRef {
  std::string host;
  std::uint16_t port = 0;
  std::string process;
  std::string object;

  /// Same endpoint and process, different object.
  ObjectRef with_object(std::string other) const;

  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};

ObjectRef parse_ref(std::string_view text);  // throws BAD_ARGS
std::string format_ref(const ObjectRef& ref);

}  // namespace iccs::conduit
