#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "graphage/training.hpp"

namespace graphage {

nlohmann::json config_to_json(const TrainConfig& cfg);

// Strict parse: unknown keys are rejected with a ConfigError.
TrainConfig config_from_json(const nlohmann::json& j);

// Applies a dotted "key=value" override (e.g. "model.variant=gin") to a
// config JSON object. The key must already exist; values are parsed with the
// type of the existing entry.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace graphage
