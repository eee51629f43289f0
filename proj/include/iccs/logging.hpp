#pragma once

#include <functional>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace iccs::log {

enum class Severity { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3 };

std::string_view to_string(Severity s);
Severity severity_from_string(std::string_view text);  // throws BAD_ARGS

using Forwarder = std::function<void(Severity, const std::string&)>;

/// Process-wide sink. Messages at or above the stderr threshold are printed;
/// every message is handed to the forwarder (the central log client once a
/// process has booted).
void write(Severity severity, std::string text);
void set_forwarder(Forwarder forwarder);
void set_stderr_threshold(Severity severity);
void set_process_name(std::string name);

/// While alive, messages written on this thread are not forwarded. The
/// forwarder's own delivery thread holds one so delivery failures cannot loop.
class NoForwardScope {
 public:
  NoForwardScope();
  ~NoForwardScope();
  NoForwardScope(const NoForwardScope&) = delete;
  NoForwardScope& operator=(const NoForwardScope&) = delete;

 private:
  bool previous_;
};

template <typename... Args>
void debug(fmt::format_string<Args...> f, Args&&... args) {
  write(Severity::kDebug, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void info(fmt::format_string<Args...> f, Args&&... args) {
  write(Severity::kInfo, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void warning(fmt::format_string<Args...> f, Args&&... args) {
  write(Severity::kWarning, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void error(fmt::format_string<Args...> f, Args&&... args) {
  write(Severity::kError, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace iccs::log
