#include "dfield/io/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "dfield/errors.hpp"
#include "dfield/io/dataset_io.hpp"
#include "json_util.hpp"

namespace dfield {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

enum class Kind { Int, Real, Bool };

// One scalar knob: where it lives in the document, its accepted range and
// how it maps onto RunConfig.
struct Field {
  const char* section;  // "" for top level
  const char* key;
  Kind kind;
  double lo;
  double hi;
  std::function<double(const RunConfig&)> get;
  std::function<void(RunConfig&, double)> set;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

#define DF_INT(sec, name, member, lo, hi)                                                     \
  Field{sec, name, Kind::Int, lo, hi, [](const RunConfig& c) { return double(c.member); }, \
        [](RunConfig& c, double v) { c.member = static_cast<decltype(c.member)>(v); }}
#define DF_REAL(sec, name, member, lo, hi) \
  Field{sec, name, Kind::Real, lo, hi, [](const RunConfig& c) { return c.member; }, [](RunConfig& c, double v) { c.member = v; }}
#define DF_BOOL(sec, name, member)                                                                         \
  Field{sec, name, Kind::Bool, 0, 1, [](const RunConfig& c) { return c.member ? 1.0 : 0.0; }, \
        [](RunConfig& c, double v) { c.member = v != 0.0; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      DF_INT("", "seed", seed, 0, 9007199254740991.0),
      DF_INT("", "checkpoint_every", checkpoint_every, 1, 1e9),

      DF_INT("model", "feature_channels", model.feature_channels, 1, 4096),
      DF_INT("model", "encoder_stages", model.encoder_stages, 1, 8),
      DF_INT("model", "refine_blocks", model.refine_blocks, 0, 64),
      DF_INT("model", "pos_bands", model.pos_bands, 1, 32),
      DF_INT("model", "col_bands", model.col_bands, 1, 32),
      DF_INT("model", "dir_bands", model.dir_bands, 1, 32),
      DF_INT("model", "hidden", model.hidden, 1, 8192),
      DF_INT("model", "double_layers", model.double_layers, 1, 64),
      DF_INT("model", "geometry_layers", model.geometry_layers, 1, 64),
      DF_INT("model", "texture_layers", model.texture_layers, 1, 64),
      DF_INT("model", "encoder_dim", model.encoder_dim, 1, 8192),
      DF_INT("model", "decoder_dim", model.decoder_dim, 1, 8192),
      DF_INT("model", "ffn", model.ffn, 1, 16384),
      DF_INT("model", "heads", model.heads, 1, 64),
      DF_REAL("model", "density_bias", model.density_bias, -100, 100),

      DF_BOOL("ablation", "double_mlp", model.shared_double_mlp),
      DF_BOOL("ablation", "colored_encoding", model.colored_encoding),

      DF_REAL("loss", "lambda_g", train.loss.lambda_g, 0, kInf),
      DF_REAL("loss", "lambda_r", train.loss.lambda_r, 0, kInf),
      DF_REAL("loss", "lambda_c", train.loss.lambda_c, 0, kInf),
      DF_INT("loss", "n_geo", train.loss.n_geo, 1, 1e7),
      DF_INT("loss", "n_reg", train.loss.n_reg, 1, 1e7),
      DF_INT("loss", "n_rays", train.loss.n_rays, 1, 1e7),
      DF_REAL("loss", "lr_pretrain", train.loss.lr_pretrain, 0, 1),
      DF_REAL("loss", "lr_finetune", train.loss.lr_finetune, 0, 1),
      DF_INT("loss", "iters_pretrain", train.loss.iters_pretrain, 0, 1e9),
      DF_INT("loss", "iters_ft_geometry", train.loss.iters_ft_geometry, 0, 1e9),
      DF_INT("loss", "iters_ft_color", train.loss.iters_ft_color, 0, 1e9),
      DF_REAL("loss", "near_surface_fraction", train.loss.near_surface_fraction, 0, 1),
      DF_REAL("loss", "perturb_std", train.loss.perturb_std, 1e-9, 10),
      DF_REAL("loss", "foreground_fraction", train.loss.foreground_fraction, 0, 1),

      DF_INT("render", "n_s", train.render.n_s, 2, 4096),
      DF_INT("render", "n_r", train.render.n_r, 1, 4096),
      DF_REAL("render", "delta_fraction", train.render.delta_fraction, 1e-9, 1),
      DF_INT("render", "chunk_rays", train.render.chunk_rays, 1, 1 << 20),

      DF_BOOL("finetune", "random_view", train.random_finetune_view),
  };
  return f;
}

#undef DF_INT
#undef DF_REAL
#undef DF_BOOL

const char* kSections[] = {"model", "ablation", "loss", "render", "finetune", "paths"};

std::string path_of(const Field& f) { return *f.section ? std::string(f.section) + "." + f.key : f.key; }

void read_field(const Field& f, const json& v, RunConfig& c) {
  const std::string where = "config " + path_of(f);
  double x = 0;
  switch (f.kind) {
    case Kind::Bool:
      x = jsonu::boolean(v, where) ? 1 : 0;
      break;
    case Kind::Int:
      if (!v.is_number_integer()) throw ValidationError(where + ": expected an integer");
      x = v.is_number_unsigned() ? static_cast<double>(v.get<std::uint64_t>()) : static_cast<double>(v.get<std::int64_t>());
      break;
    case Kind::Real:
      x = jsonu::number(v, where);
      break;
  }
  if (!(x >= f.lo && x <= f.hi)) throw ValidationError(where + ": value out of range");
  f.set(c, x);
}

json field_value(const Field& f, const RunConfig& c) {
  const double v = f.get(c);
  if (f.kind == Kind::Bool) return v != 0.0;
  if (f.kind == Kind::Int) return static_cast<std::int64_t>(v);
  return v;
}

}  // namespace

RunConfig config_from_json(const json& j) {
  jsonu::require_object(j, "config");
  RunConfig c;
  if (!j.contains("schema_version")) throw ValidationError("config: missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<long long>() != kConfigSchemaVersion) {
    throw ValidationError("config: schema_version must be " + std::to_string(kConfigSchemaVersion));
  }
  for (const auto& [k, v] : j.items()) {
    if (k == "schema_version") continue;
    bool known = false;
    for (const char* s : kSections) known = known || k == s;
    for (const auto& f : fields()) known = known || (!*f.section && k == f.key);
    if (!known) throw ValidationError("config: unknown key '" + k + "'");
  }
  for (const char* s : kSections) {
    if (!j.contains(s)) continue;
    const auto& sec = j[s];
    jsonu::require_object(sec, std::string("config ") + s);
    for (const auto& [k, v] : sec.items()) {
      bool known = false;
      for (const auto& f : fields()) known = known || (std::string(f.section) == s && k == f.key);
      if (std::string(s) == "ablation") known = known || k == "fusion";
      if (std::string(s) == "paths") known = k == "data" || k == "out";
      if (!known) throw ValidationError(std::string("config: unknown key '") + s + "." + k + "'");
    }
  }
  for (const auto& f : fields()) {
    const json* v = nullptr;
    if (!*f.section) {
      if (j.contains(f.key)) v = &j[f.key];
    } else if (j.contains(f.section) && j[f.section].contains(f.key)) {
      v = &j[f.section][f.key];
    }
    if (v) read_field(f, *v, c);
  }
  if (j.contains("ablation") && j["ablation"].contains("fusion")) {
    const auto s = jsonu::string(j["ablation"]["fusion"], "config ablation.fusion");
    if (s == "transformer") c.model.fusion = FusionMode::Transformer;
    else if (s == "average_pooling") c.model.fusion = FusionMode::AveragePooling;
    else throw ValidationError("config ablation.fusion: expected \"transformer\" or \"average_pooling\"");
  }
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    if (p.contains("data")) {
      if (!p["data"].is_array()) throw ValidationError("config paths.data: expected an array of directories");
      for (const auto& d : p["data"]) c.data_dirs.push_back(jsonu::string(d, "config paths.data"));
    }
    if (p.contains("out")) c.out_dir = jsonu::string(p["out"], "config paths.out");
  }
  c.model.seed = c.seed;
  if (c.model.encoder_dim % c.model.heads || c.model.decoder_dim % c.model.heads) {
    throw ValidationError("config model: encoder_dim and decoder_dim must be divisible by heads");
  }
  validate(c.train.loss);
  return c;
}

RunConfig read_config(const std::string& path) { return config_from_json(read_json_file(path)); }

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  for (const auto& f : fields())
    if (!*f.section) j[f.key] = field_value(f, c);
  for (const char* s : kSections) {
    ordered_json sec = ordered_json::object();
    for (const auto& f : fields())
      if (std::string(f.section) == s) sec[f.key] = field_value(f, c);
    if (std::string(s) == "ablation")
      sec["fusion"] = c.model.fusion == FusionMode::Transformer ? "transformer" : "average_pooling";
    if (std::string(s) == "paths") {
      sec["data"] = c.data_dirs;
      sec["out"] = c.out_dir;
    }
    j[s] = sec;
  }
  return j;
}

std::string config_hash(const RunConfig& c) {
  auto j = config_to_json(c);
  j.erase("paths");
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

ordered_json config_schema() {
  const RunConfig defaults;
  auto prop = [&](const Field& f) {
    ordered_json p;
    p["type"] = f.kind == Kind::Bool ? "boolean" : f.kind == Kind::Int ? "integer" : "number";
    if (f.kind != Kind::Bool) {
      p["minimum"] = f.kind == Kind::Int ? json(static_cast<std::int64_t>(f.lo)) : json(f.lo);
      if (std::isfinite(f.hi)) p["maximum"] = f.kind == Kind::Int ? json(static_cast<std::int64_t>(f.hi)) : json(f.hi);
    }
    p["default"] = field_value(f, defaults);
    return p;
  };
  ordered_json s;
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["title"] = "dfield run config";
  s["type"] = "object";
  s["additionalProperties"] = false;
  s["required"] = {"schema_version"};
  ordered_json props;
  props["schema_version"] = {{"const", kConfigSchemaVersion}};
  for (const auto& f : fields())
    if (!*f.section) props[f.key] = prop(f);
  for (const char* name : kSections) {
    ordered_json sec;
    sec["type"] = "object";
    sec["additionalProperties"] = false;
    ordered_json sp = ordered_json::object();
    for (const auto& f : fields())
      if (std::string(f.section) == name) sp[f.key] = prop(f);
    if (std::string(name) == "ablation") {
      sp["fusion"] = {{"enum", {"transformer", "average_pooling"}}, {"default", "transformer"}};
    }
    if (std::string(name) == "paths") {
      sp["data"] = {{"type", "array"}, {"items", {{"type", "string"}}}};
      sp["out"] = {{"type", "string"}};
    }
    sec["properties"] = sp;
    props[name] = sec;
  }
  s["properties"] = props;
  return s;
}

}  // namespace dfield
