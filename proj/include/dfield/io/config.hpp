#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfield/core/model.hpp"
#include "dfield/train/training.hpp"

namespace dfield {

inline constexpr int kConfigSchemaVersion = 1;

// Everything a run reads. The model seed follows `seed`.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  int checkpoint_every = 500;
  std::vector<std::string> data_dirs;  // pretraining scenes
  std::string out_dir;
};

// Missing keys take their defaults. Unknown keys, wrong types, values out of
// range and a wrong schema_version raise ValidationError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig read_config(const std::string& path);
// Fully resolved document including defaults.
nlohmann::ordered_json config_to_json(const RunConfig& c);

// Hash of the resolved document without paths, as 16 hex digits.
std::string config_hash(const RunConfig& c);

// JSON Schema (draft 2020-12) describing the accepted document.
nlohmann::ordered_json config_schema();

}  // namespace dfield
