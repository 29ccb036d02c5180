#include "salrun/value.hpp"

#include <charconv>
#include <cmath>

#include "salrun/error.hpp"

namespace salrun {

std::string format_value(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, std::get<double>(v));
  std::string out(buf, end);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

Value parse_scalar(std::string_view text) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty()) {
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(first, last, i);
    if (ec == std::errc() && p == last) return i;
    double d = 0.0;
    auto [q, ec2] = std::from_chars(first, last, d);
    if (ec2 == std::errc() && q == last && std::isfinite(d)) return d;
  }
  return std::string(text);
}

std::optional<double> as_double(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Run: return "run";
    case Provenance::Experiment: return "experiment";
    case Provenance::ModelDefault: return "model_default";
    case Provenance::GlobalDefault: return "global_default";
  }
  return "?";
}

std::optional<Provenance> provenance_from_string(std::string_view s) {
  for (auto p : {Provenance::Run, Provenance::Experiment, Provenance::ModelDefault,
                 Provenance::GlobalDefault}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

const Value& ResolvedParams::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw Error(Errc::UnknownParameter, name);
  return it->second;
}

const std::string& ResolvedParams::str(const std::string& name) const {
  const auto* s = std::get_if<std::string>(&at(name));
  if (!s) throw Error(Errc::InvalidInput, "parameter '" + name + "' is not a string");
  return *s;
}

std::int64_t ResolvedParams::integer(const std::string& name) const {
  const auto& v = at(name);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw Error(Errc::InvalidInput, "parameter '" + name + "' is not an integer");
}

double ResolvedParams::real(const std::string& name) const {
  if (auto d = as_double(at(name))) return *d;
  throw Error(Errc::InvalidInput, "parameter '" + name + "' is not numeric");
}

}  // namespace salrun
