#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "iccs/error.hpp"
#include "iccs/value.hpp"

namespace iccs::conduit {

/// One framed request or reply.
struct Envelope {
  enum class Kind { kCall, kReply };
  enum class Status { kOk, kError };

  struct ErrorInfo {
    ErrorCode code;
    std::string message;
  };

  std::uint64_t id = 0;
  Kind kind = Kind::kCall;

  // call
  std::string object;
  std::string method;
  json args;

  // reply
  Status status = Status::kOk;
  json value;
  std::optional<ErrorInfo> error;

  static Envelope call(std::uint64_t id, std::string object, std::string method, json args);
  static Envelope ok(std::uint64_t id, json value);
  static Envelope failure(std::uint64_t id, ErrorCode code, std::string message);

  bool is_call() const { return kind == Kind::kCall; }
};

json to_json(const Envelope& e);
Envelope envelope_from_json(const json& j);  // throws BAD_ARGS

std::string serialize(const Envelope& e);
Envelope parse_envelope(std::string_view text);  // throws BAD_ARGS

}  // namespace iccs::conduit
