#pragma once

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "dfield/errors.hpp"
#include "dfield/scene/geometry.hpp"

namespace dfield::jsonu {

using nlohmann::json;

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ValidationError(where + ": unknown key '" + k + "'");
  }
}

inline const json& at(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ValidationError(what + ": expected a number");
  return v.get<double>();
}

inline long long integer(const json& v, const std::string& what) {
  if (!v.is_number_integer()) throw ValidationError(what + ": expected an integer");
  return v.get<long long>();
}

inline bool boolean(const json& v, const std::string& what) {
  if (!v.is_boolean()) throw ValidationError(what + ": expected true or false");
  return v.get<bool>();
}

inline std::string string(const json& v, const std::string& what) {
  if (!v.is_string()) throw ValidationError(what + ": expected a string");
  return v.get<std::string>();
}

inline Vec3 vec3(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3) throw ValidationError(what + ": expected 3 numbers");
  return Vec3(number(v[0], what), number(v[1], what), number(v[2], what));
}

inline json array(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace dfield::jsonu
