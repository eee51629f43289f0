#include "iccs/conduit/object_ref.hpp"

#include <charconv>

#include <fmt/format.h>

#include "iccs/error.hpp"

namespace iccs::conduit {

bool is_name_token(std::string_view text) {
  if (text.empty()) return false;
  for (char c : text) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

ObjectRef ObjectRef::with_object(std::string other) const {
  ObjectRef r = *this;
  r.object = std::move(other);
  return r;
}

namespace {

[[noreturn]] void malformed(std::string_view text, std::string_view why) {
  throw Error(ErrorCode::kBadArgs, fmt::format("malformed ref '{}': {}", text, why));
}

}  // namespace

ObjectRef parse_ref(std::string_view text) {
  constexpr std::string_view kScheme = "ref://";
  if (!text.starts_with(kScheme)) malformed(text, "missing ref:// scheme");
  std::string_view rest = text.substr(kScheme.size());

  auto slash = rest.find('/');
  if (slash == std::string_view::npos) malformed(text, "missing process");
  std::string_view authority = rest.substr(0, slash);
  std::string_view path = rest.substr(slash + 1);

  auto colon = authority.rfind(':');
  if (colon == std::string_view::npos) malformed(text, "missing port");
  std::string_view host = authority.substr(0, colon);
  std::string_view port_text = authority.substr(colon + 1);
  if (host.empty() || !is_name_token(host)) malformed(text, "bad host");

  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 1 ||
      port > 65535) {
    malformed(text, "port must be 1-65535");
  }

  auto second = path.find('/');
  if (second == std::string_view::npos) malformed(text, "missing object");
  std::string_view process = path.substr(0, second);
  std::string_view object = path.substr(second + 1);
  if (!is_name_token(process)) malformed(text, "bad process name");
  if (!is_name_token(object)) malformed(text, "bad object name");

  return ObjectRef{std::string(host), static_cast<std::uint16_t>(port), std::string(process),
                   std::string(object)};
}

std::string format_ref(const ObjectRef& ref) {
  return fmt::format("ref://{}:{}/{}/{}", ref.host, ref.port, ref.process, ref.object);
}

}  // namespace iccs::conduit
