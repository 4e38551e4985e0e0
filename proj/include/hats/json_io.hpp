#pragma once

#include <json.hpp>

#include "hats/env.hpp"

namespace hats {

/// {"kind":"tap","target":"e1"}; only present fields are written.
nlohmann::ordered_json action_to_json(const UiAction& action);
/// Inverse of action_to_json. Rejects unknown fields and presence-rule
/// violations with hats::Error.
UiAction action_from_json(const nlohmann::json& j);

/// Action fields plus "state".
nlohmann::ordered_json step_to_json(const Step& step);
/// The transition id is not serialized; callers re-derive it when needed.
Step step_from_json(const nlohmann::json& j);

nlohmann::ordered_json state_to_json(const UiState& state);

} // namespace hats
