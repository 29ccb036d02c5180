#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace salrun {

/// Scalar parameter value: string, integer or floating point.
using Value = std::variant<std::string, std::int64_t, double>;

/// Partial name -> value mapping, as supplied by one precedence layer.
using ParamMap = std::map<std::string, Value>;

std::string format_value(const Value& v);

/// Parses command-line text as an integer, then a float, then falls back to a string.
Value parse_scalar(std::string_view text);

inline bool is_number(const Value& v) { return !std::holds_alternative<std::string>(v); }

/// Numeric view of an int or float value; nullopt for strings.
std::optional<double> as_double(const Value& v);

/// Layers of the precedence ladder, greatest precedence first.
enum class Provenance { Run, Experiment, ModelDefault, GlobalDefault };

std::string_view to_string(Provenance p);
std::optional<Provenance> provenance_from_string(std::string_view s);

struct ResolvedParams {
  std::map<std::string, Value> values;
  std::map<std::string, Provenance> provenance;

  const Value& at(const std::string& name) const;
  const std::string& str(const std::string& name) const;
  std::int64_t integer(const std::string& name) const;
  double real(const std::string& name) const;

  bool operator==(const ResolvedParams&) const = default;
};

}  // namespace salrun
