#pragma once

#include <map>
#include <optional>
#include <string>

#include "iccs/value.hpp"

namespace iccs::gateway {

/// Colors, fonts, severity colors and spacing used by every console view.
json default_style_tokens();

/// Panel descriptors by type tag. A descriptor is everything a console needs
/// to open a panel for an object of that type:
///   {type_tag, panel_kind, fields: [{name, display}], streams: [...],
///    commands: [{method, args, requires_reservation}]}
const std::map<std::string, json>& panel_descriptors();

/// The descriptor for `type_tag`, or nullopt.
std::optional<json> panel_for(const std::string& type_tag);

/// True when `method` on objects of `type_tag` needs a reservation token.
bool requires_reservation(const std::string& type_tag, const std::string& method);

}  // namespace iccs::gateway
