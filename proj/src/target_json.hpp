#pragma once

// JSON forms shared by the tick log and the UI bridge.

#include <json.hpp>

#include "telearm/runtime.hpp"

namespace telearm::app {

nlohmann::json target_to_json(const Target& target);
/// Exact inverse of target_to_json; no clamping. Throws std::invalid_argument.
Target target_from_json(const nlohmann::json& j, std::size_t dof);

nlohmann::json controller_to_json(const ControllerConfig& cfg);
ControllerConfig controller_from_json(const nlohmann::json& j);

}  // namespace telearm::app
