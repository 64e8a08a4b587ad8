#pragma once

#include <nlohmann/json.hpp>

#include "spcg/models.hpp"

namespace spcg {

/// nlohmann ADL hooks for the structs that cross file-format boundaries.
void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

}  // namespace spcg
