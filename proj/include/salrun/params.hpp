#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "salrun/image.hpp"
#include "salrun/value.hpp"

namespace salrun {

struct EnumConstraint {
  std::vector<std::string> choices;
};

struct IntConstraint {
  std::optional<std::int64_t> min_exclusive;
  std::optional<std::int64_t> max_exclusive;
  bool odd = false;
};

struct FloatConstraint {
  std::optional<double> min_exclusive;
  std::optional<double> max_exclusive;
};

using Constraint = std::variant<EnumConstraint, IntConstraint, FloatConstraint>;

/// Ordering rule between two numeric parameters, checked once both are resolved.
struct CrossFieldRule {
  enum class Op { LessThan, GreaterThan } op;
  std::string other;
};

struct ParameterSpec {
  std::string name;
  Value default_value;
  std::string description;
  std::string valid_values;  // human-readable, shown verbatim
  Constraint constraint;
  std::optional<CrossFieldRule> cross_field;

  /// Returns `v` converted to the parameter's type (ints widen to floats), or
  /// throws ConstraintViolation naming the parameter, value and valid values.
  Value check(const Value& v) const;
};

using ParameterTable = std::map<std::string, ParameterSpec>;

/// The eight framework-wide parameters, in display order.
inline constexpr std::array<std::string_view, 8> kGlobalParameterNames = {
    "do_smoothing", "smooth_size", "smooth_std", "smooth_prop",
    "scale_output", "scale_min",   "scale_max",  "color_space"};

bool is_global_parameter(std::string_view name);

struct GlobalConfig {
  ParameterTable parameters;
};

GlobalConfig load_global_config(const std::filesystem::path& path);
GlobalConfig parse_global_config(std::string_view json_text, std::string_view origin = "<memory>");

struct AssetSpec {
  std::string relative_path;
  std::string url;
  std::string sha256;
};

enum class ModelType { Native, External };

struct SmoothingPreference {
  int size = 1;
  double std = 1.0;
  bool operator==(const SmoothingPreference&) const = default;
};

/// Pixels a model trims from each side of its output (valid-region outputs).
struct BorderTrim {
  int top = 0, bottom = 0, left = 0, right = 0;
};

/// How an external model is started. Command arguments may use the
/// placeholders {model_dir} and {asset_dir}.
struct LaunchSpec {
  std::vector<std::string> command;
  std::map<std::string, std::string> env;
  double timeout_s = 300.0;
};

struct ModelManifest {
  std::string name;
  std::string long_name;
  std::string citation;
  ModelType model_type = ModelType::Native;
  std::vector<AssetSpec> model_files;
  ParameterTable parameters;
  std::optional<std::string> notes;
  std::optional<ColorSpace> preferred_color_space;
  std::optional<SmoothingPreference> preferred_smoothing;
  std::optional<BorderTrim> output_trim;
  std::optional<LaunchSpec> launch;
  std::filesystem::path directory;
};

ModelManifest load_manifest(const std::filesystem::path& path);
ModelManifest parse_manifest(std::string_view json_text, std::string_view origin = "<memory>");

/// One parameter's candidate values, one slot per precedence layer.
struct LayerValues {
  std::optional<Value> run;
  std::optional<Value> experiment;
  std::optional<Value> model_default;
  std::optional<Value> global_default;
};

struct LadderPick {
  Value value;
  Provenance source;
};

/// First present layer in the order run > experiment > model default > global default.
std::optional<LadderPick> pick_layer(const LayerValues& layers);

/// Resolves every global and model-specific parameter of `manifest`.
ResolvedParams resolve(const ModelManifest& manifest, const GlobalConfig& global,
                       const ParamMap& experiment_params, const ParamMap& run_params);

enum class ScaleMode { MinMax, None, Normalized };

struct GaussianSmoothing {
  int size = 1;
  double std = 1.0;
  bool operator==(const GaussianSmoothing&) const = default;
};

/// Concrete pipeline settings after the "default"/"proportional" aliases are expanded.
struct EffectivePipelineSettings {
  ColorSpace color_space = ColorSpace::RGB;
  std::optional<GaussianSmoothing> smoothing;
  ScaleMode scale_mode = ScaleMode::MinMax;
  double scale_min = 0.0;
  double scale_max = 1.0;
  bool operator==(const EffectivePipelineSettings&) const = default;
};

EffectivePipelineSettings resolve_aliases(const ResolvedParams& rp, const ModelManifest& manifest,
                                          Eigen::Index image_height, Eigen::Index image_width);

std::string describe_global(const GlobalConfig& global);
std::string describe_model(const ModelManifest& manifest);

}  // namespace salrun
