#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "fan/blocks.hpp"
#include "fan/train.hpp"

namespace fan {

// JSON round-trips with unknown-key rejection.

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// FNV-1a hash of the canonical dump, for provenance headers.
std::string config_hash(const nlohmann::json& j);

} // namespace fan
