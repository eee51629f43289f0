#include "iccs/conduit/envelope.hpp"

#include <fmt/format.h>

#include "iccs/conduit/object_ref.hpp"

namespace iccs::conduit {

Envelope Envelope::call(std::uint64_t id, std::string object, std::string method, json args) {
  Envelope e;
  e.id = id;
  e.kind = Kind::kCall;
  e.object = std::move(object);
  e.method = std::move(method);
  e.args = std::move(args);
  return e;
}

Envelope Envelope::ok(std::uint64_t id, json value) {
  Envelope e;
  e.id = id;
  e.kind = Kind::kReply;
  e.status = Status::kOk;
  e.value = std::move(value);
  return e;
}

Envelope Envelope::failure(std::uint64_t id, ErrorCode code, std::string message) {
  Envelope e;
  e.id = id;
  e.kind = Kind::kReply;
  e.status = Status::kError;
  e.error = ErrorInfo{code, std::move(message)};
  return e;
}

json to_json(const Envelope& e) {
  json j;
  j["id"] = e.id;
  if (e.kind == Envelope::Kind::kCall) {
    j["kind"] = "call";
    j["object"] = e.object;
    j["method"] = e.method;
    j["args"] = e.args;
  } else {
    j["kind"] = "reply";
    if (e.status == Envelope::Status::kOk) {
      j["status"] = "ok";
      j["value"] = e.value;
    } else {
      j["status"] = "error";
      const auto& err = e.error.value();
      j["error"] = {{"code", to_string(err.code)}, {"message", err.message}};
    }
  }
  return j;
}

namespace {

[[noreturn]] void bad(std::string_view why) {
  throw Error(ErrorCode::kBadArgs, fmt::format("malformed envelope: {}", why));
}

void forbid(const json& j, std::initializer_list<const char*> keys, std::string_view kind) {
  for (const char* k : keys) {
    if (j.contains(k)) bad(fmt::format("field '{}' not allowed in a {}", k, kind));
  }
}

}  // namespace

Envelope envelope_from_json(const json& j) {
  if (!j.is_object()) bad("not an object");
  if (!j.contains("id") || !j["id"].is_number_unsigned()) bad("id must be an unsigned integer");
  if (!j.contains("kind") || !j["kind"].is_string()) bad("missing kind");

  Envelope e;
  e.id = j["id"].get<std::uint64_t>();
  const auto kind = j["kind"].get<std::string>();
  if (kind == "call") {
    forbid(j, {"status", "value", "error"}, "call");
    e.kind = Envelope::Kind::kCall;
    if (!j.contains("object") || !j["object"].is_string()) bad("call needs object");
    if (!j.contains("method") || !j["method"].is_string()) bad("call needs method");
    e.object = j["object"].get<std::string>();
    e.method = j["method"].get<std::string>();
    if (!is_name_token(e.object) || !is_name_token(e.method)) bad("object/method must be name tokens");
    e.args = j.value("args", json(nullptr));
  } else if (kind == "reply") {
    forbid(j, {"object", "method", "args"}, "reply");
    e.kind = Envelope::Kind::kReply;
    if (!j.contains("status") || !j["status"].is_string()) bad("reply needs status");
    const auto status = j["status"].get<std::string>();
    if (status == "ok") {
      if (j.contains("error")) bad("ok reply carries error");
      e.status = Envelope::Status::kOk;
      e.value = j.value("value", json(nullptr));
    } else if (status == "error") {
      if (j.contains("value")) bad("error reply carries value");
      e.status = Envelope::Status::kError;
      if (!j.contains("error") || !j["error"].is_object()) bad("error reply needs error");
      const auto& err = j["error"];
      auto code = error_code_from_string(err.value("code", ""));
      if (!code) bad("unknown error code");
      e.error = Envelope::ErrorInfo{*code, err.value("message", "")};
    } else {
      bad("status must be ok or error");
    }
  } else {
    bad("kind must be call or reply");
  }
  return e;
}

std::string serialize(const Envelope& e) {
  return to_json(e).dump(-1, ' ', false, json::error_handler_t::replace);
}

Envelope parse_envelope(std::string_view text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) bad("invalid JSON");
  return envelope_from_json(j);
}

}  // namespace iccs::conduit
