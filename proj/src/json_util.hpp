#pragma once

#include <json.hpp>
#include <string>

#include "salrun/error.hpp"
#include "salrun/value.hpp"

namespace salrun::detail {

using json = nlohmann::json;

inline Value value_from_json(const json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  throw Error(Errc::SchemaError, where + ": expected a string or number");
}

inline json value_to_json(const Value& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

}  // namespace salrun::detail
