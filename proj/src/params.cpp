#include "salrun/params.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace salrun {

namespace fs = std::filesystem;
using detail::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text, std::string_view origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, std::string(origin) + ": " + e.what());
  }
}

void require_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw Error(Errc::SchemaError, where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(Errc::SchemaError, where + ": unknown field '" + key + "'");
  }
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw Error(Errc::SchemaError, where + ": missing string field '" + key + "'");
  return obj[key].get<std::string>();
}

std::string constraint_hint(const ParameterSpec& spec) {
  if (const auto* ic = std::get_if<IntConstraint>(&spec.constraint); ic && ic->odd)
    return " (must be odd)";
  return {};
}

[[noreturn]] void violation(const ParameterSpec& spec, const Value& v) {
  throw Error(Errc::ConstraintViolation, "parameter '" + spec.name + "' = " + format_value(v) +
                                             " is invalid; valid values: " + spec.valid_values +
                                             constraint_hint(spec));
}

Constraint parse_constraint(const json& j, const std::string& where,
                            std::optional<CrossFieldRule>& cross) {
  require_keys(j, {"type", "values", "min_exclusive", "max_exclusive", "odd", "less_than",
                   "greater_than"},
               where);
  const std::string type = get_string(j, "type", where);
  if (j.contains("less_than"))
    cross = CrossFieldRule{CrossFieldRule::Op::LessThan, get_string(j, "less_than", where)};
  if (j.contains("greater_than"))
    cross = CrossFieldRule{CrossFieldRule::Op::GreaterThan, get_string(j, "greater_than", where)};

  if (type == "enum") {
    EnumConstraint c;
    if (!j.contains("values") || !j["values"].is_array() || j["values"].empty())
      throw Error(Errc::SchemaError, where + ": enum constraint needs a non-empty 'values' list");
    for (const auto& v : j["values"]) {
      if (!v.is_string()) throw Error(Errc::SchemaError, where + ": enum values must be strings");
      c.choices.push_back(v.get<std::string>());
    }
    return c;
  }
  if (type == "int") {
    IntConstraint c;
    if (j.contains("min_exclusive")) c.min_exclusive = j["min_exclusive"].get<std::int64_t>();
    if (j.contains("max_exclusive")) c.max_exclusive = j["max_exclusive"].get<std::int64_t>();
    if (j.contains("odd")) c.odd = j["odd"].get<bool>();
    // Exclusive bounds must leave at least one admissible integer.
    if (c.min_exclusive && c.max_exclusive && *c.max_exclusive - *c.min_exclusive < 2)
      throw Error(Errc::SchemaError, where + ": degenerate integer range");
    return c;
  }
  if (type == "float") {
    FloatConstraint c;
    if (j.contains("min_exclusive")) c.min_exclusive = j["min_exclusive"].get<double>();
    if (j.contains("max_exclusive")) c.max_exclusive = j["max_exclusive"].get<double>();
    if (c.min_exclusive && c.max_exclusive && !(*c.min_exclusive < *c.max_exclusive))
      throw Error(Errc::SchemaError, where + ": degenerate float range");
    return c;
  }
  throw Error(Errc::SchemaError, where + ": unknown constraint type '" + type + "'");
}

ParameterSpec parse_parameter(const std::string& name, const json& j, const std::string& origin) {
  const std::string where = origin + ": parameter '" + name + "'";
  require_keys(j, {"default", "description", "valid_values", "constraint"}, where);
  if (!j.contains("default")) throw Error(Errc::SchemaError, where + ": missing 'default'");
  if (!j.contains("constraint")) throw Error(Errc::SchemaError, where + ": missing 'constraint'");
  ParameterSpec spec;
  spec.name = name;
  spec.default_value = detail::value_from_json(j["default"], where);
  spec.description = get_string(j, "description", where);
  spec.valid_values = get_string(j, "valid_values", where);
  spec.constraint = parse_constraint(j["constraint"], where + " constraint", spec.cross_field);
  try {
    spec.default_value = spec.check(spec.default_value);
  } catch (const Error& e) {
    throw Error(Errc::SchemaError, where + ": default violates its constraint (" + e.what() + ")");
  }
  return spec;
}

ParameterTable parse_parameter_table(const json& j, const std::string& origin) {
  if (!j.is_object()) throw Error(Errc::SchemaError, origin + ": 'parameters' must be an object");
  ParameterTable table;
  for (const auto& [name, body] : j.items()) table.emplace(name, parse_parameter(name, body, origin));
  return table;
}

bool cross_field_holds(CrossFieldRule::Op op, double self, double other) {
  return op == CrossFieldRule::Op::LessThan ? self < other : self > other;
}

// Cross-field rules over a complete name -> value table.
template <typename Lookup, typename OnFail>
void check_cross_fields(const ParameterTable& specs, Lookup&& lookup, OnFail&& on_fail) {
  for (const auto& [name, spec] : specs) {
    if (!spec.cross_field) continue;
    const Value* self = lookup(name);
    const Value* other = lookup(spec.cross_field->other);
    if (!self || !other) continue;
    const auto a = as_double(*self);
    const auto b = as_double(*other);
    if (a && b && !cross_field_holds(spec.cross_field->op, *a, *b)) on_fail(spec, *self, *other);
  }
}

}  // namespace

bool is_global_parameter(std::string_view name) {
  return std::find(kGlobalParameterNames.begin(), kGlobalParameterNames.end(), name) !=
         kGlobalParameterNames.end();
}

Value ParameterSpec::check(const Value& v) const {
  if (const auto* ec = std::get_if<EnumConstraint>(&constraint)) {
    const auto* s = std::get_if<std::string>(&v);
    if (!s || std::find(ec->choices.begin(), ec->choices.end(), *s) == ec->choices.end())
      violation(*this, v);
    return v;
  }
  if (const auto* ic = std::get_if<IntConstraint>(&constraint)) {
    const auto* i = std::get_if<std::int64_t>(&v);
    if (!i) violation(*this, v);
    if (ic->min_exclusive && !(*i > *ic->min_exclusive)) violation(*this, v);
    if (ic->max_exclusive && !(*i < *ic->max_exclusive)) violation(*this, v);
    if (ic->odd && *i % 2 == 0) violation(*this, v);
    return v;
  }
  const auto& fc = std::get<FloatConstraint>(constraint);
  const auto d = as_double(v);
  if (!d || !std::isfinite(*d)) violation(*this, v);
  if (fc.min_exclusive && !(*d > *fc.min_exclusive)) violation(*this, v);
  if (fc.max_exclusive && !(*d < *fc.max_exclusive)) violation(*this, v);
  return *d;
}

GlobalConfig parse_global_config(std::string_view json_text, std::string_view origin) {
  const std::string where(origin);
  const json root = parse_json(json_text, origin);
  require_keys(root, {"parameters"}, where);
  if (!root.contains("parameters")) throw Error(Errc::SchemaError, where + ": missing 'parameters'");
  GlobalConfig cfg{parse_parameter_table(root["parameters"], where)};
  for (const auto& [name, _] : cfg.parameters) {
    if (!is_global_parameter(name))
      throw Error(Errc::SchemaError, where + ": unknown global parameter '" + name + "'");
  }
  for (auto name : kGlobalParameterNames) {
    if (!cfg.parameters.count(std::string(name)))
      throw Error(Errc::SchemaError, where + ": missing global parameter '" + std::string(name) + "'");
  }
  check_cross_fields(
      cfg.parameters,
      [&](const std::string& n) -> const Value* {
        auto it = cfg.parameters.find(n);
        return it == cfg.parameters.end() ? nullptr : &it->second.default_value;
      },
      [&](const ParameterSpec& spec, const Value&, const Value&) {
        throw Error(Errc::SchemaError,
                    where + ": default of '" + spec.name + "' violates: " + spec.valid_values);
      });
  return cfg;
}

GlobalConfig load_global_config(const fs::path& path) {
  return parse_global_config(read_text(path), path.string());
}

ModelManifest parse_manifest(std::string_view json_text, std::string_view origin) {
  const std::string where(origin);
  const json root = parse_json(json_text, origin);
  require_keys(root,
               {"name", "long_name", "citation", "model_type", "model_files", "parameters", "notes",
                "preferred_color_space", "preferred_smoothing", "output_trim", "launch"},
               where);
  ModelManifest m;
  m.name = get_string(root, "name", where);
  if (m.name.empty()) throw Error(Errc::SchemaError, where + ": empty model name");
  m.long_name = get_string(root, "long_name", where);
  m.citation = get_string(root, "citation", where);

  const std::string type = get_string(root, "model_type", where);
  if (type == "native") {
    m.model_type = ModelType::Native;
  } else if (type == "external") {
    m.model_type = ModelType::External;
  } else {
    throw Error(Errc::SchemaError, where + ": model_type must be 'native' or 'external', got '" + type + "'");
  }

  static const std::regex kSha256("^[0-9a-f]{64}$");
  if (root.contains("model_files")) {
    for (const auto& f : root["model_files"]) {
      const std::string fwhere = where + ": model_files entry";
      require_keys(f, {"relative_path", "url", "sha256"}, fwhere);
      AssetSpec a{get_string(f, "relative_path", fwhere), get_string(f, "url", fwhere),
                  get_string(f, "sha256", fwhere)};
      const fs::path rel(a.relative_path);
      if (a.relative_path.empty() || rel.is_absolute() ||
          std::find(rel.begin(), rel.end(), "..") != rel.end())
        throw Error(Errc::SchemaError, fwhere + ": relative_path must stay inside the cache");
      if (!std::regex_match(a.sha256, kSha256))
        throw Error(Errc::SchemaError, fwhere + ": sha256 must be 64 lowercase hex characters");
      m.model_files.push_back(std::move(a));
    }
  }

  if (root.contains("parameters")) m.parameters = parse_parameter_table(root["parameters"], where);
  for (const auto& [name, _] : m.parameters) {
    if (is_global_parameter(name))
      throw Error(Errc::NameCollision,
                  where + ": model parameter '" + name + "' shadows a global parameter");
  }

  if (root.contains("notes")) m.notes = get_string(root, "notes", where);
  if (root.contains("preferred_color_space")) {
    const auto cs = color_space_from_string(get_string(root, "preferred_color_space", where));
    if (!cs || *cs == ColorSpace::Default)
      throw Error(Errc::SchemaError, where + ": invalid preferred_color_space");
    m.preferred_color_space = cs;
  }
  if (root.contains("preferred_smoothing")) {
    const auto& s = root["preferred_smoothing"];
    require_keys(s, {"size", "std"}, where + ": preferred_smoothing");
    SmoothingPreference p{s.value("size", 0), s.value("std", 0.0)};
    if (p.size < 1 || p.size % 2 == 0 || !(p.std > 0.0))
      throw Error(Errc::SchemaError, where + ": preferred_smoothing needs odd size >= 1 and std > 0");
    m.preferred_smoothing = p;
  }
  if (root.contains("output_trim")) {
    const auto& t = root["output_trim"];
    require_keys(t, {"top", "bottom", "left", "right"}, where + ": output_trim");
    BorderTrim b{t.value("top", 0), t.value("bottom", 0), t.value("left", 0), t.value("right", 0)};
    if (b.top < 0 || b.bottom < 0 || b.left < 0 || b.right < 0)
      throw Error(Errc::SchemaError, where + ": output_trim amounts must be non-negative");
    m.output_trim = b;
  }
  if (root.contains("launch")) {
    const auto& l = root["launch"];
    require_keys(l, {"command", "env", "timeout_s"}, where + ": launch");
    LaunchSpec spec;
    if (!l.contains("command") || !l["command"].is_array() || l["command"].empty())
      throw Error(Errc::SchemaError, where + ": launch.command must be a non-empty list");
    for (const auto& arg : l["command"]) spec.command.push_back(arg.get<std::string>());
    if (l.contains("env")) spec.env = l["env"].get<std::map<std::string, std::string>>();
    if (l.contains("timeout_s")) spec.timeout_s = l["timeout_s"].get<double>();
    if (!(spec.timeout_s > 0.0)) throw Error(Errc::SchemaError, where + ": timeout_s must be positive");
    static const std::regex kPlaceholder(R"(\{([a-z_]*)\})");
    for (const auto& arg : spec.command) {
      for (std::sregex_iterator it(arg.begin(), arg.end(), kPlaceholder), end; it != end; ++it) {
        const std::string ph = (*it)[1];
        if (ph != "model_dir" && ph != "asset_dir")
          throw Error(Errc::SchemaError, where + ": unknown launch placeholder {" + ph + "}");
      }
    }
    m.launch = std::move(spec);
  }
  if (m.model_type == ModelType::External && !m.launch)
    throw Error(Errc::SchemaError, where + ": external models need a 'launch' section");
  return m;
}

ModelManifest load_manifest(const fs::path& path) {
  ModelManifest m = parse_manifest(read_text(path), path.string());
  m.directory = fs::absolute(path).parent_path();
  return m;
}

std::optional<LadderPick> pick_layer(const LayerValues& layers) {
  if (layers.run) return LadderPick{*layers.run, Provenance::Run};
  if (layers.experiment) return LadderPick{*layers.experiment, Provenance::Experiment};
  if (layers.model_default) return LadderPick{*layers.model_default, Provenance::ModelDefault};
  if (layers.global_default) return LadderPick{*layers.global_default, Provenance::GlobalDefault};
  return std::nullopt;
}

ResolvedParams resolve(const ModelManifest& manifest, const GlobalConfig& global,
                       const ParamMap& experiment_params, const ParamMap& run_params) {
  auto find_spec = [&](const std::string& name) -> const ParameterSpec* {
    if (auto it = global.parameters.find(name); it != global.parameters.end()) return &it->second;
    if (auto it = manifest.parameters.find(name); it != manifest.parameters.end()) return &it->second;
    return nullptr;
  };
  for (const ParamMap* layer : {&experiment_params, &run_params}) {
    for (const auto& [name, _] : *layer) {
      if (!find_spec(name))
        throw Error(Errc::UnknownParameter,
                    "'" + name + "' is neither a global parameter nor a parameter of " + manifest.name);
    }
  }

  auto lookup = [](const ParamMap& m, const std::string& name) -> std::optional<Value> {
    if (auto it = m.find(name); it != m.end()) return it->second;
    return std::nullopt;
  };

  ResolvedParams out;
  auto resolve_one = [&](const ParameterSpec& spec, bool is_model_param) {
    LayerValues layers;
    layers.run = lookup(run_params, spec.name);
    layers.experiment = lookup(experiment_params, spec.name);
    if (is_model_param) {
      layers.model_default = spec.default_value;
    } else {
      layers.global_default = spec.default_value;
    }
    const auto pick = pick_layer(layers);
    out.values[spec.name] = spec.check(pick->value);
    out.provenance[spec.name] = pick->source;
  };
  for (const auto& [_, spec] : global.parameters) resolve_one(spec, false);
  for (const auto& [_, spec] : manifest.parameters) resolve_one(spec, true);

  auto by_name = [&](const std::string& n) -> const Value* {
    auto it = out.values.find(n);
    return it == out.values.end() ? nullptr : &it->second;
  };
  auto fail = [](const ParameterSpec& spec, const Value& self, const Value& other) {
    throw Error(Errc::CrossFieldViolation, "'" + spec.name + "' = " + format_value(self) +
                                               " must be " +
                                               (spec.cross_field->op == CrossFieldRule::Op::LessThan
                                                    ? "less than"
                                                    : "greater than") +
                                               " '" + spec.cross_field->other +
                                               "' = " + format_value(other));
  };
  check_cross_fields(global.parameters, by_name, fail);
  check_cross_fields(manifest.parameters, by_name, fail);
  return out;
}

EffectivePipelineSettings resolve_aliases(const ResolvedParams& rp, const ModelManifest& manifest,
                                          Eigen::Index image_height, Eigen::Index image_width) {
  EffectivePipelineSettings eff;

  const std::string& cs = rp.str("color_space");
  if (cs == "default") {
    eff.color_space = manifest.preferred_color_space.value_or(ColorSpace::RGB);
  } else {
    eff.color_space = color_space_from_string(cs).value();
  }

  const std::string& smoothing = rp.str("do_smoothing");
  const GaussianSmoothing custom{static_cast<int>(rp.integer("smooth_size")), rp.real("smooth_std")};
  if (smoothing == "none") {
    eff.smoothing.reset();
  } else if (smoothing == "custom") {
    eff.smoothing = custom;
  } else if (smoothing == "proportional") {
    const double sigma = rp.real("smooth_prop") * static_cast<double>(std::max(image_height, image_width));
    eff.smoothing = GaussianSmoothing{2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1, sigma};
  } else if (manifest.preferred_smoothing) {
    eff.smoothing = GaussianSmoothing{manifest.preferred_smoothing->size, manifest.preferred_smoothing->std};
  } else {
    eff.smoothing = custom;
  }

  const std::string& scale = rp.str("scale_output");
  eff.scale_mode = scale == "none"         ? ScaleMode::None
                   : scale == "normalized" ? ScaleMode::Normalized
                                           : ScaleMode::MinMax;
  eff.scale_min = rp.real("scale_min");
  eff.scale_max = rp.real("scale_max");
  return eff;
}

namespace {

void render_table(std::ostream& os, const ParameterTable& params,
                  const std::vector<std::string>& order) {
  std::size_t w_name = 9, w_default = 7;
  for (const auto& n : order) {
    const auto& p = params.at(n);
    w_name = std::max(w_name, n.size());
    w_default = std::max(w_default, format_value(p.default_value).size());
  }
  os << std::left << std::setw(static_cast<int>(w_name) + 2) << "Parameter"
     << std::setw(static_cast<int>(w_default) + 2) << "Default"
     << "Valid values | Description\n";
  for (const auto& n : order) {
    const auto& p = params.at(n);
    os << std::left << std::setw(static_cast<int>(w_name) + 2) << n
       << std::setw(static_cast<int>(w_default) + 2) << format_value(p.default_value)
       << p.valid_values << " | " << p.description << "\n";
  }
}

}  // namespace

std::string describe_global(const GlobalConfig& global) {
  std::ostringstream os;
  os << "Global parameters\n\n";
  std::vector<std::string> order(kGlobalParameterNames.begin(), kGlobalParameterNames.end());
  render_table(os, global.parameters, order);
  return os.str();
}

std::string describe_model(const ModelManifest& m) {
  std::ostringstream os;
  os << m.name << ": " << m.long_name << "\n"
     << "Type: " << (m.model_type == ModelType::Native ? "native" : "external") << "\n"
     << "Citation: " << m.citation << "\n";
  if (m.notes) os << "Notes: " << *m.notes << "\n";
  if (m.preferred_color_space) os << "Preferred color space: " << to_string(*m.preferred_color_space) << "\n";
  if (m.preferred_smoothing)
    os << "Preferred smoothing: size " << m.preferred_smoothing->size << ", std "
       << m.preferred_smoothing->std << "\n";
  if (!m.model_files.empty()) {
    os << "Model files:\n";
    for (const auto& a : m.model_files) os << "  " << a.relative_path << "  (" << a.url << ")\n";
  }
  os << "\n";
  if (m.parameters.empty()) {
    os << "No model-specific parameters.\n";
  } else {
    std::vector<std::string> order;
    for (const auto& [n, _] : m.parameters) order.push_back(n);
    render_table(os, m.parameters, order);
  }
  return os.str();
}

}  // namespace salrun
