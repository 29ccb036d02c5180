#include "salrun/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "json_util.hpp"
#include "salrun/assets.hpp"
#include "salrun/color.hpp"
#include "salrun/external.hpp"
#include "salrun/image_io.hpp"
#include "salrun/log.hpp"
#include "salrun/mapops.hpp"

namespace salrun {

namespace fs = std::filesystem;

fs::path ExperimentSpec::output_dir(const RunSpec& run) const {
  return run.output_path ? *run.output_path : base_output_path / run.algorithm;
}

namespace {

[[noreturn]] void schema_error(std::string_view origin, const std::string& what) {
  throw Error(Errc::SchemaError, std::string(origin) + ": " + what);
}

void check_keys(const YAML::Node& node, std::initializer_list<std::string_view> allowed,
                std::string_view origin, const std::string& where) {
  if (!node.IsMap()) schema_error(origin, where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      schema_error(origin, "unknown key '" + key + "' in " + where);
  }
}

std::string scalar_string(const YAML::Node& node, std::string_view origin, const std::string& key) {
  if (!node || !node.IsScalar()) schema_error(origin, "'" + key + "' must be a scalar");
  return node.as<std::string>();
}

Value yaml_value(const YAML::Node& node, std::string_view origin, const std::string& key) {
  if (!node.IsScalar()) schema_error(origin, "parameter '" + key + "' must be a scalar");
  const std::string text = node.Scalar();
  // Quoted scalars carry the non-specific tag "!" and always stay strings.
  if (node.Tag() == "!") return text;
  return parse_scalar(text);
}

ParamMap yaml_params(const YAML::Node& node, std::string_view origin, const std::string& where) {
  ParamMap out;
  if (!node || node.IsNull()) return out;
  if (!node.IsMap()) schema_error(origin, where + " parameters must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    out[key] = yaml_value(kv.second, origin, key);
  }
  return out;
}

fs::path anchored(const fs::path& p, const fs::path& base) {
  if (p.is_absolute() || base.empty()) return p.lexically_normal();
  return (base / p).lexically_normal();
}

}  // namespace

ExperimentSpec parse_experiment_text(std::string_view yaml_text, const fs::path& base_dir,
                                     std::string_view origin) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw Error(Errc::ParseError, std::string(origin) + ": " + e.what());
  }
  check_keys(root, {"experiment", "runs"}, origin, "the document");
  const YAML::Node exp = root["experiment"];
  if (!exp) schema_error(origin, "missing 'experiment' section");
  check_keys(exp, {"name", "description", "input_path", "base_output_path", "parameters"}, origin,
             "experiment");

  ExperimentSpec spec;
  if (exp["name"]) spec.name = scalar_string(exp["name"], origin, "name");
  if (exp["description"]) spec.description = scalar_string(exp["description"], origin, "description");
  if (!exp["input_path"]) schema_error(origin, "missing experiment.input_path");
  if (!exp["base_output_path"]) schema_error(origin, "missing experiment.base_output_path");
  const std::string input = scalar_string(exp["input_path"], origin, "input_path");
  const std::string base_out = scalar_string(exp["base_output_path"], origin, "base_output_path");
  if (input.empty()) schema_error(origin, "experiment.input_path is empty");
  if (base_out.empty()) schema_error(origin, "experiment.base_output_path is empty");
  spec.input_path = anchored(input, base_dir);
  spec.base_output_path = anchored(base_out, base_dir);
  spec.parameters = yaml_params(exp["parameters"], origin, "experiment");

  const YAML::Node runs = root["runs"];
  if (!runs || !runs.IsSequence() || runs.size() == 0)
    schema_error(origin, "'runs' must be a non-empty list");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string where = "run #" + std::to_string(i + 1);
    const YAML::Node r = runs[i];
    check_keys(r, {"algorithm", "output_path", "parameters"}, origin, where);
    RunSpec run;
    if (!r["algorithm"]) schema_error(origin, where + " has no algorithm");
    run.algorithm = scalar_string(r["algorithm"], origin, "algorithm");
    if (run.algorithm.empty()) schema_error(origin, where + " has an empty algorithm");
    if (r["output_path"]) {
      const std::string out = scalar_string(r["output_path"], origin, "output_path");
      if (out.empty()) schema_error(origin, where + " has an empty output_path");
      run.output_path = anchored(out, base_dir);
    }
    run.parameters = yaml_params(r["parameters"], origin, where);
    spec.runs.push_back(std::move(run));
  }

  // Two runs writing into one directory would silently overwrite each other.
  std::map<fs::path, std::size_t> seen;
  for (std::size_t i = 0; i < spec.runs.size(); ++i) {
    const fs::path dir = spec.output_dir(spec.runs[i]);
    if (auto [it, inserted] = seen.emplace(dir, i); !inserted)
      schema_error(origin, "runs #" + std::to_string(it->second + 1) + " and #" +
                               std::to_string(i + 1) + " share output directory " + dir.string());
  }
  return spec;
}

ExperimentSpec parse_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_experiment_text(text, fs::absolute(path).parent_path(), path.string());
}

std::vector<fs::path> list_input_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::EmptyInputDir, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file(ec)) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<RunPlan> plan(const ExperimentSpec& spec, const Registry& registry,
                          const GlobalConfig& global) {
  const auto inputs = list_input_images(spec.input_path);
  if (inputs.empty()) throw Error(Errc::EmptyInputDir, "no PNG or JPEG images in " + spec.input_path.string());
  std::set<std::string> stems;
  for (const auto& f : inputs) {
    if (!stems.insert(f.stem().string()).second)
      throw Error(Errc::InvalidInput, "two inputs share the output name " + f.stem().string() + ".png");
  }

  std::vector<RunPlan> plans;
  for (std::size_t i = 0; i < spec.runs.size(); ++i) {
    const RunSpec& run = spec.runs[i];
    const std::string where = "run #" + std::to_string(i + 1) + " (" + run.algorithm + ")";
    RunPlan p;
    p.run_index = i;
    p.algorithm = run.algorithm;
    p.input_files = inputs;
    p.output_dir = spec.output_dir(run);
    try {
      p.model = registry.get(run.algorithm);
    } catch (const Error& e) {
      throw Error(Errc::UnknownModel, where + ": no such model");
    }
    const ModelManifest& manifest = p.model->manifest();

    // Experiment-level model parameters only apply to models that declare them.
    ParamMap experiment_layer;
    for (const auto& [name, value] : spec.parameters) {
      if (is_global_parameter(name) || manifest.parameters.count(name)) {
        experiment_layer[name] = value;
        continue;
      }
      bool declared_elsewhere = false;
      for (const auto* m : registry.list()) declared_elsewhere |= m->parameters.count(name) > 0;
      if (!declared_elsewhere)
        throw Error(Errc::UnknownParameter, "experiment parameter '" + name + "' is not declared by any model");
      warn(where + ": ignoring experiment parameter '" + name + "' (not a parameter of " +
           run.algorithm + ")");
    }
    try {
      p.resolved = resolve(manifest, global, experiment_layer, run.parameters);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }

    const AssetStatus assets = verify_assets(manifest, registry.options().cache_dir);
    if (!assets.complete()) {
      std::string list;
      for (const auto& m : assets.missing) list += (list.empty() ? "" : ", ") + m;
      p.skip_reason = "missing model files: " + list;
      warn(where + ": skipped, " + *p.skip_reason + " (run `download " + run.algorithm + "`)");
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

SaliencyMap run_pipeline(const Model& model, const Image& rgb, const ResolvedParams& params) {
  const ModelManifest& manifest = model.manifest();
  const EffectivePipelineSettings eff = resolve_aliases(params, manifest, rgb.height(), rgb.width());

  SaliencyMap raw;
  if (model.receives_rgb()) {
    ResolvedParams concrete = params;
    concrete.values["color_space"] = std::string(to_string(eff.color_space));
    raw = model.compute(rgb, concrete);
  } else {
    raw = model.compute(convert_color(rgb, eff.color_space), params);
  }
  if (raw.height() <= 0 || raw.width() <= 0 || !raw.values.allFinite())
    throw Error(Errc::ModelError, manifest.name + " returned an empty or non-finite map");

  FitPolicy policy = RescaleBilinear{};
  if (manifest.output_trim) {
    const auto& t = *manifest.output_trim;
    policy = PadReplicate{t.top, t.bottom, t.left, t.right};
  }
  SaliencyMap out = fit_to_dims(raw, rgb.height(), rgb.width(), policy);
  out = smooth(out, eff);
  out = rescale_values(out, eff.scale_mode, eff.scale_min, eff.scale_max);
  out.model_name = manifest.name;
  out.resolved_params = params;
  return out;
}

std::string run_record(const RunPlan& plan) {
  using detail::json;
  json values = json::object(), provenance = json::object(), inputs = json::array();
  for (const auto& [k, v] : plan.resolved.values) values[k] = detail::value_to_json(v);
  for (const auto& [k, v] : plan.resolved.provenance) provenance[k] = std::string(to_string(v));
  for (const auto& f : plan.input_files) inputs.push_back(f.filename().string());
  const ModelManifest& m = plan.model->manifest();
  json record = {{"framework_version", SALRUN_VERSION},
                 {"protocol_version", kProtocolVersion},
                 {"run_index", plan.run_index},
                 {"algorithm", plan.algorithm},
                 {"model_type", m.model_type == ModelType::Native ? "native" : "external"},
                 {"output_dir", plan.output_dir.string()},
                 {"resolved_params", values},
                 {"provenance", provenance},
                 {"input_files", inputs}};
  return record.dump(2) + "\n";
}

std::size_t ExperimentReport::total_ok() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.ok;
  return n;
}

std::size_t ExperimentReport::total_failed() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.failed;
  return n;
}

std::size_t ExperimentReport::total_skipped() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.skipped;
  return n;
}

namespace {

enum class ImageOutcome { Ok, Failed, Skipped };

RunReport execute_run(const RunPlan& plan, const ExecuteOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  RunReport report;
  report.run_index = plan.run_index;
  report.algorithm = plan.algorithm;
  report.output_dir = plan.output_dir;
  if (plan.skipped()) {
    report.skipped = plan.input_files.size();
    report.skip_reason = plan.skip_reason;
    return report;
  }

  std::error_code ec;
  fs::create_directories(plan.output_dir, ec);
  if (ec || !fs::is_directory(plan.output_dir))
    throw Error(Errc::IoError, "cannot create output directory " + plan.output_dir.string());
  {
    std::ofstream sidecar(plan.output_dir / kRunRecordName, std::ios::trunc);
    sidecar << run_record(plan);
    if (!sidecar) throw Error(Errc::IoError, "cannot write run record in " + plan.output_dir.string());
  }

  const std::size_t n = plan.input_files.size();
  std::vector<ImageOutcome> outcomes(n, ImageOutcome::Failed);
  std::vector<std::string> messages(n);

  auto process = [&](std::size_t i) {
    const fs::path& input = plan.input_files[i];
    const fs::path png = plan.output_dir / (input.stem().string() + ".png");
    if (options.skip_existing && fs::exists(png)) {
      outcomes[i] = ImageOutcome::Skipped;
      return;
    }
    try {
      const Image img = load_image(input);
      const SaliencyMap map = run_pipeline(*plan.model, img, plan.resolved);
      if (options.write_f32raw)
        write_map(map, plan.output_dir / (input.stem().string() + ".f32"), MapFormat::F32Raw);
      write_map(map, png, MapFormat::Png8);
      outcomes[i] = ImageOutcome::Ok;
    } catch (const std::exception& e) {
      messages[i] = e.what();
    }
  };

  int workers = std::max(1, options.workers);
  if (plan.model->max_concurrency() > 0) workers = std::min(workers, plan.model->max_concurrency());
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) process(i);
      });
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    switch (outcomes[i]) {
      case ImageOutcome::Ok: ++report.ok; break;
      case ImageOutcome::Skipped: ++report.skipped; break;
      case ImageOutcome::Failed:
        ++report.failed;
        report.failures.emplace_back(plan.input_files[i], messages[i]);
        break;
    }
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return report;
}

}  // namespace

ExperimentReport execute(const std::vector<RunPlan>& plans, const ExecuteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  for (const auto& p : plans) report.runs.push_back(execute_run(p, options));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace salrun
