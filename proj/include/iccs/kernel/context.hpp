#pragma once

#include <memory>
#include <string>

#include "iccs/conduit/client.hpp"
#include "iccs/kernel/host.hpp"
#include "iccs/services/interfaces.hpp"

namespace iccs::kernel {

/// What a configurable's constructor may use: its host process, the shared
/// framework clients, and the process's outbound call accounting.
struct ProcessContext {
  std::string process;
  Host* host = nullptr;
  std::shared_ptr<conduit::Resolver> resolver;
  std::shared_ptr<services::EventSink> events;
  std::shared_ptr<services::ReservationAuthority> reservations;
  std::shared_ptr<conduit::CallStats> outbound = std::make_shared<conduit::CallStats>();
  conduit::ConnectionPolicy default_policy;

  /// Another object of this process (local or distributed), or nullptr.
  std::shared_ptr<Configurable> find(std::string_view name) const;
  /// Typed lookup; BAD_ARGS when missing or of the wrong kind.
  template <typename T>
  std::shared_ptr<T> require(std::string_view name) const;

  conduit::ClientOptions client_options() const;
  conduit::ClientOptions client_options(const conduit::ConnectionPolicy& policy) const;
  conduit::ObjectRef self_ref(const std::string& object) const;
};

void throw_missing_binding(std::string_view name, std::string_view process);

template <typename T>
std::shared_ptr<T> ProcessContext::require(std::string_view name) const {
  auto typed = std::dynamic_pointer_cast<T>(find(name));
  if (!typed) throw_missing_binding(name, process);
  return typed;
}

}  // namespace iccs::kernel
