#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfield/scene/dataset.hpp"
#include "dfield/scene/scene.hpp"

namespace dfield {

// Scene spec documents. Unknown keys are rejected with ValidationError.
nlohmann::ordered_json spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(const nlohmann::json& j);
SceneSpec read_spec(const std::string& path);

nlohmann::ordered_json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& j);

// Directory layout: scene.json, view_000.png, mask_000.png, camera_000.json,
// ..., meta.json. Files are written in a fixed order with no timestamps, so
// equal inputs give equal bytes.
void write_dataset(const std::string& dir, const SceneSpec& spec, const MultiViewSample& sample);

struct LoadedDataset {
  SceneSpec spec;
  MultiViewSample sample;
  bool has_masks = true;  // false when any mask file is missing
  std::vector<std::string> warnings;
};

// Images come back quantized to 8 bits. Missing masks are replaced by empty
// masks and reported through `has_masks` and `warnings`.
LoadedDataset read_dataset(const std::string& dir);

// Reads "{}" JSON or throws ValidationError naming the file.
nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace dfield
