#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "salrun/models.hpp"
#include "salrun/params.hpp"

namespace salrun {

struct RunSpec {
  std::string algorithm;
  std::optional<std::filesystem::path> output_path;
  ParamMap parameters;
};

struct ExperimentSpec {
  std::string name;
  std::string description;
  std::filesystem::path input_path;
  std::filesystem::path base_output_path;
  ParamMap parameters;
  std::vector<RunSpec> runs;

  /// run.output_path if given, else base_output_path/<algorithm>.
  std::filesystem::path output_dir(const RunSpec& run) const;
};

/// Parses a YAML experiment file. Relative paths are taken relative to the
/// file's directory. Parameters are not validated here.
ExperimentSpec parse_experiment(const std::filesystem::path& path);
ExperimentSpec parse_experiment_text(std::string_view yaml_text,
                                     const std::filesystem::path& base_dir = {},
                                     std::string_view origin = "<memory>");

/// PNG/JPEG files directly inside `dir` (case-insensitive extension), sorted.
std::vector<std::filesystem::path> list_input_images(const std::filesystem::path& dir);

struct RunPlan {
  std::size_t run_index = 0;
  std::string algorithm;
  std::shared_ptr<const Model> model;
  ResolvedParams resolved;
  std::vector<std::filesystem::path> input_files;
  std::filesystem::path output_dir;
  std::optional<std::string> skip_reason;  // set when the model's assets are incomplete

  bool skipped() const { return skip_reason.has_value(); }
};

std::vector<RunPlan> plan(const ExperimentSpec& spec, const Registry& registry,
                          const GlobalConfig& global);

/// The fixed per-image pipeline: color conversion, model, fit to input
/// dimensions, smoothing, value rescaling.
SaliencyMap run_pipeline(const Model& model, const Image& rgb, const ResolvedParams& params);

struct ExecuteOptions {
  bool skip_existing = false;
  int workers = 1;
  bool write_f32raw = false;
};

struct RunReport {
  std::size_t run_index = 0;
  std::string algorithm;
  std::filesystem::path output_dir;
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::optional<std::string> skip_reason;
  std::vector<std::pair<std::filesystem::path, std::string>> failures;
  double wall_seconds = 0.0;
};

struct ExperimentReport {
  std::vector<RunReport> runs;
  double wall_seconds = 0.0;

  std::size_t total_ok() const;
  std::size_t total_failed() const;
  std::size_t total_skipped() const;
};

ExperimentReport execute(const std::vector<RunPlan>& plans, const ExecuteOptions& options = {});

inline constexpr const char* kRunRecordName = "_run_record";

/// Contents of the per-run `_run_record` sidecar (JSON, deterministic).
std::string run_record(const RunPlan& plan);

}  // namespace salrun
