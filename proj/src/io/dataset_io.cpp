#include "dfield/io/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfield/errors.hpp"
#include "dfield/io/png.hpp"
#include "json_util.hpp"

namespace dfield {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace jsonu;

namespace {

const char* kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Box: return "box";
    case PrimitiveKind::Capsule: return "capsule";
  }
  return "";
}

const char* texture_name(TextureKind k) {
  switch (k) {
    case TextureKind::Constant: return "constant";
    case TextureKind::Checker: return "checker";
    case TextureKind::Gradient: return "gradient";
  }
  return "";
}

PrimitiveKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "sphere") return PrimitiveKind::Sphere;
  if (s == "box") return PrimitiveKind::Box;
  if (s == "capsule") return PrimitiveKind::Capsule;
  throw ValidationError(where + ": unknown primitive kind '" + s + "'");
}

TextureKind parse_texture(const std::string& s, const std::string& where) {
  if (s == "constant") return TextureKind::Constant;
  if (s == "checker") return TextureKind::Checker;
  if (s == "gradient") return TextureKind::Gradient;
  throw ValidationError(where + ": unknown texture kind '" + s + "'");
}

ordered_json mat3_json(const Mat3& m) {
  ordered_json a = ordered_json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3 mat3_from(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 9) throw ValidationError(what + ": expected 9 numbers, row-major");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = number(v[i], what);
  return m;
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

std::string indexed(const char* stem, int k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03d.%s", stem, k, ext);
  return buf;
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ValidationError("failed writing " + path);
}

ordered_json spec_to_json(const SceneSpec& spec) {
  ordered_json j;
  j["id"] = spec.id;
  j["seed"] = spec.seed;
  if (spec.random_primitives > 0) j["random_primitives"] = spec.random_primitives;
  if (spec.bounds) j["bounds"] = {{"lo", vec_json(spec.bounds->lo)}, {"hi", vec_json(spec.bounds->hi)}};
  ordered_json prims = ordered_json::array();
  for (const auto& p : spec.primitives) {
    ordered_json q;
    q["kind"] = kind_name(p.kind);
    q["center"] = vec_json(p.center);
    q["rotation"] = mat3_json(p.rotation);
    if (p.kind == PrimitiveKind::Box) q["half_extents"] = vec_json(p.half_extents);
    else q["radius"] = p.radius;
    if (p.kind == PrimitiveKind::Capsule) q["half_length"] = p.half_length;
    ordered_json t;
    t["kind"] = texture_name(p.texture.kind);
    t["color_a"] = vec_json(p.texture.color_a);
    t["color_b"] = vec_json(p.texture.color_b);
    t["frequency"] = p.texture.frequency;
    t["axis"] = p.texture.axis;
    q["texture"] = t;
    prims.push_back(q);
  }
  j["primitives"] = prims;
  return j;
}

SceneSpec spec_from_json(const json& j) {
  check_keys(j, {"id", "seed", "random_primitives", "bounds", "primitives"}, "scene spec");
  SceneSpec s;
  if (j.contains("id")) s.id = string(j["id"], "id");
  if (j.contains("seed")) {
    const auto seed = integer(j["seed"], "seed");
    if (seed < 0) throw ValidationError("seed must be non-negative");
    s.seed = static_cast<std::uint64_t>(seed);
  }
  if (j.contains("random_primitives")) s.random_primitives = static_cast<int>(integer(j["random_primitives"], "random_primitives"));
  if (j.contains("bounds")) {
    const auto& b = j["bounds"];
    check_keys(b, {"lo", "hi"}, "bounds");
    s.bounds = Aabb{vec3(at(b, "lo", "bounds"), "bounds.lo"), vec3(at(b, "hi", "bounds"), "bounds.hi")};
  }
  if (j.contains("primitives")) {
    if (!j["primitives"].is_array()) throw ValidationError("primitives: expected an array");
    int i = 0;
    for (const auto& q : j["primitives"]) {
      const std::string where = "primitives[" + std::to_string(i++) + "]";
      check_keys(q, {"kind", "center", "rotation", "euler_deg", "radius", "half_extents", "half_length", "texture"},
                 where);
      Primitive p;
      p.kind = parse_kind(string(at(q, "kind", where), where + ".kind"), where);
      if (q.contains("center")) p.center = vec3(q["center"], where + ".center");
      if (q.contains("rotation") && q.contains("euler_deg"))
        throw ValidationError(where + ": give rotation or euler_deg, not both");
      if (q.contains("rotation")) p.rotation = mat3_from(q["rotation"], where + ".rotation");
      if (q.contains("euler_deg")) p.rotation = rotation_from_euler_deg(vec3(q["euler_deg"], where + ".euler_deg"));
      if (q.contains("radius")) p.radius = number(q["radius"], where + ".radius");
      if (q.contains("half_extents")) p.half_extents = vec3(q["half_extents"], where + ".half_extents");
      if (q.contains("half_length")) p.half_length = number(q["half_length"], where + ".half_length");
      if (q.contains("texture")) {
        const auto& t = q["texture"];
        const std::string tw = where + ".texture";
        check_keys(t, {"kind", "color_a", "color_b", "frequency", "axis"}, tw);
        if (t.contains("kind")) p.texture.kind = parse_texture(string(t["kind"], tw + ".kind"), tw);
        if (t.contains("color_a")) p.texture.color_a = vec3(t["color_a"], tw + ".color_a");
        if (t.contains("color_b")) p.texture.color_b = vec3(t["color_b"], tw + ".color_b");
        if (t.contains("frequency")) p.texture.frequency = number(t["frequency"], tw + ".frequency");
        if (t.contains("axis")) {
          p.texture.axis = static_cast<int>(integer(t["axis"], tw + ".axis"));
          if (p.texture.axis < 0 || p.texture.axis > 2) throw ValidationError(tw + ".axis must be 0, 1 or 2");
        }
      }
      s.primitives.push_back(p);
    }
  }
  return s;
}

SceneSpec read_spec(const std::string& path) { return spec_from_json(read_json_file(path)); }

ordered_json camera_to_json(const Camera& c) {
  ordered_json j;
  const auto& k = c.intrinsics();
  j["intrinsics"] = {k.fx, k.fy, k.cx, k.cy};
  ordered_json e = ordered_json::array();
  for (int r = 0; r < 3; ++r) {
    for (int q = 0; q < 3; ++q) e.push_back(c.rotation()(r, q));
    e.push_back(c.translation()[r]);
  }
  j["extrinsics"] = e;
  j["resolution"] = {c.width(), c.height()};
  return j;
}

Camera camera_from_json(const json& j) {
  check_keys(j, {"intrinsics", "extrinsics", "resolution"}, "camera");
  const auto& in = at(j, "intrinsics", "camera");
  const auto& ex = at(j, "extrinsics", "camera");
  const auto& res = at(j, "resolution", "camera");
  if (!in.is_array() || in.size() != 4) throw ValidationError("camera.intrinsics: expected [fx, fy, cx, cy]");
  if (!ex.is_array() || ex.size() != 12) throw ValidationError("camera.extrinsics: expected 12 numbers (3x4 row-major)");
  if (!res.is_array() || res.size() != 2) throw ValidationError("camera.resolution: expected [width, height]");
  Intrinsics k{number(in[0], "fx"), number(in[1], "fy"), number(in[2], "cx"), number(in[3], "cy")};
  Mat3 r;
  Vec3 t;
  for (int row = 0; row < 3; ++row) {
    for (int q = 0; q < 3; ++q) r(row, q) = number(ex[4 * row + q], "camera.extrinsics");
    t[row] = number(ex[4 * row + 3], "camera.extrinsics");
  }
  return Camera(k, r, t, static_cast<int>(integer(res[0], "width")), static_cast<int>(integer(res[1], "height")));
}

void write_dataset(const std::string& dir, const SceneSpec& spec, const MultiViewSample& sample) {
  fs::create_directories(dir);
  const fs::path root(dir);
  write_text_file((root / "scene.json").string(), spec_to_json(spec).dump(2) + "\n");
  for (std::size_t k = 0; k < sample.views.size(); ++k) {
    const auto& v = sample.views[k];
    const int i = static_cast<int>(k);
    write_png((root / indexed("view", i, "png")).string(), v.image);
    write_png((root / indexed("mask", i, "png")).string(), v.mask);
    write_text_file((root / indexed("camera", i, "json")).string(), camera_to_json(v.camera).dump(2) + "\n");
  }
  ordered_json meta;
  meta["scene_id"] = sample.scene_id;
  meta["units"] = "scene units";
  meta["views"] = sample.views.size();
  meta["depth_bounds"] = {sample.depth_bounds[0], sample.depth_bounds[1]};
  meta["bounds"] = {{"lo", vec_json(sample.bounds.lo)}, {"hi", vec_json(sample.bounds.hi)}};
  write_text_file((root / "meta.json").string(), meta.dump(2) + "\n");
}

LoadedDataset read_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw ValidationError("dataset directory " + dir + " does not exist");
  LoadedDataset out;
  out.spec = read_spec((root / "scene.json").string());
  const json meta = read_json_file((root / "meta.json").string());
  check_keys(meta, {"scene_id", "units", "views", "depth_bounds", "bounds"}, "meta.json");
  const auto n = integer(at(meta, "views", "meta.json"), "meta.json views");
  if (n < 1) throw ValidationError("meta.json: views must be positive");
  const auto& db = at(meta, "depth_bounds", "meta.json");
  if (!db.is_array() || db.size() != 2) throw ValidationError("meta.json: depth_bounds expects [t_n, t_f]");
  auto& s = out.sample;
  s.scene_id = string(at(meta, "scene_id", "meta.json"), "scene_id");
  s.depth_bounds = Vec2(number(db[0], "depth_bounds"), number(db[1], "depth_bounds"));
  const auto& b = at(meta, "bounds", "meta.json");
  check_keys(b, {"lo", "hi"}, "meta.json bounds");
  s.bounds = Aabb{vec3(at(b, "lo", "bounds"), "bounds.lo"), vec3(at(b, "hi", "bounds"), "bounds.hi")};
  for (int k = 0; k < n; ++k) {
    View v;
    v.image = read_png_image((root / indexed("view", k, "png")).string());
    v.camera = camera_from_json(read_json_file((root / indexed("camera", k, "json")).string()));
    if (v.camera.width() != v.image.width || v.camera.height() != v.image.height) {
      throw ValidationError("view " + std::to_string(k) + ": camera resolution does not match the image");
    }
    if (k > 0 && (v.image.width != s.width() || v.image.height != s.height())) {
      throw ValidationError("all views must share one resolution");
    }
    const fs::path mp = root / indexed("mask", k, "png");
    if (fs::exists(mp)) {
      v.mask = read_png_mask(mp.string());
      if (v.mask.width != v.image.width || v.mask.height != v.image.height) {
        throw ValidationError("mask " + std::to_string(k) + " resolution does not match its view");
      }
    } else {
      v.mask = Mask(v.image.width, v.image.height);
      out.has_masks = false;
      out.warnings.push_back("missing " + mp.filename().string());
    }
    s.views.push_back(std::move(v));
  }
  return out;
}

}  // namespace dfield
