#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>

#include "iccs/error.hpp"
#include "iccs/logging.hpp"
#include "iccs/value.hpp"

namespace iccs {

namespace {
constexpr std::string_view kCodeNames[] = {
    "CONNECT_FAILED", "COMM_FAILURE", "TIMEOUT",  "NO_SUCH_OBJECT", "NO_SUCH_METHOD",
    "BAD_ARGS",       "RESERVED",     "OUT_OF_RANGE", "APP_ERROR",
};
}  // namespace

std::string_view to_string(ErrorCode code) {
  return kCodeNames[static_cast<int>(code)];
}

std::optional<ErrorCode> error_code_from_string(std::string_view text) {
  for (int i = 0; i < static_cast<int>(std::size(kCodeNames)); ++i) {
    if (kCodeNames[i] == text) return static_cast<ErrorCode>(i);
  }
  return std::nullopt;
}

json to_json(const FieldValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

FieldValue field_value_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::kBadArgs, "value must be a number, text or boolean");
}

bool is_numeric(const FieldValue& value) {
  return std::holds_alternative<double>(value);
}

Timestamp now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace iccs

namespace iccs::log {

namespace {

struct LogState {
  std::mutex mu;
  Forwarder forwarder;
  Severity threshold = Severity::kInfo;
  std::string process = "-";
};

LogState& state() {
  static LogState s;
  return s;
}

// A forwarder that itself logs (e.g. a failing remote append) must not recurse.
thread_local bool in_forwarder = false;

}  // namespace

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::kDebug: return "debug";
    case Severity::kInfo: return "info";
    case Severity::kWarning: return "warning";
    case Severity::kError: return "error";
  }
  return "info";
}

Severity severity_from_string(std::string_view text) {
  if (text == "debug") return Severity::kDebug;
  if (text == "info") return Severity::kInfo;
  if (text == "warning") return Severity::kWarning;
  if (text == "error") return Severity::kError;
  throw Error(ErrorCode::kBadArgs, fmt::format("unknown severity '{}'", text));
}

void write(Severity severity, std::string text) {
  Forwarder forwarder;
  {
    auto& s = state();
    std::lock_guard lock(s.mu);
    if (severity >= s.threshold) {
      std::fprintf(stderr, "[%s] %s: %s\n", s.process.c_str(),
                   std::string(to_string(severity)).c_str(), text.c_str());
    }
    forwarder = s.forwarder;
  }
  if (forwarder && !in_forwarder) {
    in_forwarder = true;
    forwarder(severity, text);
    in_forwarder = false;
  }
}

NoForwardScope::NoForwardScope() : previous_(in_forwarder) { in_forwarder = true; }
NoForwardScope::~NoForwardScope() { in_forwarder = previous_; }

void set_forwarder(Forwarder forwarder) {
  auto& s = state();
  std::lock_guard lock(s.mu);
  s.forwarder = std::move(forwarder);
}

void set_stderr_threshold(Severity severity) {
  auto& s = state();
  std::lock_guard lock(s.mu);
  s.threshold = severity;
}

void set_process_name(std::string name) {
  auto& s = state();
  std::lock_guard lock(s.mu);
  s.process = std::move(name);
}

}  // namespace iccs::log
