#pragma once
// Strict JSON helpers: parse errors carry a line number, unknown keys are
// rejected, and type errors name the offending field.

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "styletopo/errors.hpp"

namespace styletopo::json_util {

using Json = nlohmann::json;

Json parse(std::string_view text);
Json parse_file(const std::string& path);

void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

template <typename T>
T get_or(const Json& obj, const char* key, const T& fallback, std::string_view context) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(context) + "." + key + ": wrong type");
  }
}

template <typename T>
T require(const Json& obj, const char* key, std::string_view context) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(std::string(context) + "." + key + ": missing");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(context) + "." + key + ": wrong type");
  }
}

}  // namespace styletopo::json_util
