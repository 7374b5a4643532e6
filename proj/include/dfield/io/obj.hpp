#pragma once

#include <string>

#include "dfield/render/renderer.hpp"

namespace dfield {

void write_obj(const std::string& path, const TriangleMesh& mesh);
// Reads `v` and `f` records; polygons are fanned into triangles, texture and
// normal indices are ignored.
TriangleMesh read_obj(const std::string& path);

}  // namespace dfield
