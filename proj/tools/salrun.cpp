// salrun: run saliency models over image directories.
//
//   salrun info [global|MODEL]
//   salrun run EXPERIMENT.yaml
//   salrun run --model NAME --input DIR --output DIR [--param k=v]...
//   salrun download MODEL|--all
//   salrun clean MODEL|--all
//   salrun shell MODEL
//   salrun version

#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "salrun/assets.hpp"
#include "salrun/experiment.hpp"
#include "salrun/external.hpp"
#include "salrun/models.hpp"
#include "salrun/params.hpp"

namespace fs = std::filesystem;
using namespace salrun;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailures = 1;
constexpr int kExitUsage = 2;

std::string env_or(const char* key, const std::string& fallback) {
  const char* v = std::getenv(key);
  return v && *v ? v : fallback;
}

fs::path default_cache_dir() {
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "salrun";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "salrun";
  return fs::temp_directory_path() / "salrun-cache";
}

struct Locations {
  std::string models_dir = env_or("SALRUN_MODELS_DIR", std::string(SALRUN_DEFAULT_DATA_DIR) + "/models");
  std::string config = env_or("SALRUN_CONFIG", std::string(SALRUN_DEFAULT_DATA_DIR) + "/config.json");
  std::string cache_dir = env_or("SALRUN_CACHE_DIR", default_cache_dir().string());
  bool keep_artifacts = false;

  Registry registry() const {
    RegistryOptions opts;
    opts.models_dir = models_dir;
    opts.cache_dir = cache_dir;
    opts.keep_artifacts = keep_artifacts;
    return Registry::load(opts);
  }
};

std::string asset_summary(const ModelManifest& m, const fs::path& cache) {
  if (m.model_files.empty()) return "no files needed";
  const auto status = verify_assets(m, cache);
  if (status.complete()) return "ready";
  return std::to_string(status.missing.size()) + " of " + std::to_string(m.model_files.size()) +
         " files missing";
}

int cmd_info(const Locations& loc, const std::string& target) {
  const Registry reg = loc.registry();
  if (!target.empty()) {
    const GlobalConfig global = load_global_config(loc.config);
    std::cout << describe(target, reg, global);
    return kExitOk;
  }
  std::size_t w = 4, wl = 9;
  for (const auto* m : reg.list()) {
    w = std::max(w, m->name.size());
    wl = std::max(wl, m->long_name.size());
  }
  std::cout << std::left << std::setw(static_cast<int>(w) + 2) << "Name" << std::setw(static_cast<int>(wl) + 2)
            << "Long name" << std::setw(10) << "Type" << "Assets\n";
  for (const auto* m : reg.list()) {
    std::cout << std::left << std::setw(static_cast<int>(w) + 2) << m->name
              << std::setw(static_cast<int>(wl) + 2) << m->long_name << std::setw(10)
              << (m->model_type == ModelType::Native ? "native" : "external")
              << asset_summary(*m, loc.cache_dir) << "\n";
  }
  return kExitOk;
}

struct RunArgs {
  std::string experiment;
  std::string model, input, output;
  std::vector<std::string> params;
  int workers = 1;
  bool skip_existing = false;
  bool f32raw = false;
};

int cmd_run(const Locations& loc, const RunArgs& args) {
  ExperimentSpec spec;
  const bool adhoc = !args.model.empty() || !args.input.empty() || !args.output.empty();
  if (adhoc == !args.experiment.empty()) {
    std::cerr << "run: give either an experiment file or --model, --input and --output\n";
    return kExitUsage;
  }
  if (adhoc) {
    if (args.model.empty() || args.input.empty() || args.output.empty()) {
      std::cerr << "run: --model, --input and --output are all required\n";
      return kExitUsage;
    }
    RunSpec run;
    run.algorithm = args.model;
    run.output_path = fs::path(args.output);
    for (const auto& kv : args.params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::cerr << "run: --param expects key=value, got '" << kv << "'\n";
        return kExitUsage;
      }
      run.parameters[kv.substr(0, eq)] = parse_scalar(kv.substr(eq + 1));
    }
    spec.name = "ad-hoc " + args.model;
    spec.input_path = args.input;
    spec.base_output_path = args.output;
    spec.runs.push_back(std::move(run));
  } else {
    if (!args.params.empty()) {
      std::cerr << "run: --param only applies to the --model form; put parameters in the experiment file\n";
      return kExitUsage;
    }
    spec = parse_experiment(args.experiment);
  }

  const GlobalConfig global = load_global_config(loc.config);
  const Registry reg = loc.registry();
  const auto plans = plan(spec, reg, global);
  ExecuteOptions opts;
  opts.skip_existing = args.skip_existing;
  opts.workers = args.workers;
  opts.write_f32raw = args.f32raw;
  const ExperimentReport report = execute(plans, opts);

  for (const auto& r : report.runs) {
    std::cout << "run " << r.run_index + 1 << " " << r.algorithm << " -> " << r.output_dir.string()
              << ": ok " << r.ok << ", failed " << r.failed << ", skipped " << r.skipped;
    if (r.skip_reason) std::cout << " (" << *r.skip_reason << ")";
    std::cout << std::fixed << std::setprecision(2) << " [" << r.wall_seconds << " s]\n";
    for (const auto& [file, msg] : r.failures) std::cerr << "  " << file.string() << ": " << msg << "\n";
  }
  std::cout << "total: ok " << report.total_ok() << ", failed " << report.total_failed() << ", skipped "
            << report.total_skipped() << std::fixed << std::setprecision(2) << " [" << report.wall_seconds
            << " s]\n";
  return report.total_failed() == 0 ? kExitOk : kExitFailures;
}

std::vector<const ModelManifest*> selected(const Registry& reg, const std::string& model, bool all) {
  if (all) return reg.list();
  return {&reg.get(model)->manifest()};
}

int cmd_download(const Locations& loc, const std::string& model, bool all) {
  const Registry reg = loc.registry();
  bool ok = true;
  for (const auto* m : selected(reg, model, all)) {
    if (m->model_files.empty()) {
      std::cout << m->name << ": nothing to download\n";
      continue;
    }
    const AssetReport report = download_assets(*m, loc.cache_dir);
    for (const auto& e : report.entries) {
      auto& os = (e.outcome == AssetOutcome::Downloaded || e.outcome == AssetOutcome::Skipped) ? std::cout : std::cerr;
      os << m->name << ": " << e.relative_path << " " << to_string(e.outcome);
      if (!e.detail.empty()) os << " (" << e.detail << ")";
      os << "\n";
    }
    ok &= report.ok();
  }
  return ok ? kExitOk : kExitFailures;
}

int cmd_clean(const Locations& loc, const std::string& model, bool all) {
  const Registry reg = loc.registry();
  bool ok = true;
  for (const auto* m : selected(reg, model, all)) {
    const AssetReport report = clean_assets(*m, loc.cache_dir);
    std::cout << m->name << ": removed " << report.count(AssetOutcome::Removed) << " file(s)\n";
    ok &= report.ok();
  }
  return ok ? kExitOk : kExitFailures;
}

int cmd_shell(const Locations& loc, const std::string& model) {
  const Registry reg = loc.registry();
  const auto m = reg.get(model);
  const auto* ext = dynamic_cast<const ExternalModel*>(m.get());
  if (!ext) {
    std::cerr << model << " is a native model: it runs in-process and has no environment to open a shell in\n";
    return kExitUsage;
  }
  const auto env = ext->handle().environment();
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<char*> c_env;
  for (auto& e : env_strings) c_env.push_back(e.data());
  c_env.push_back(nullptr);
  std::string shell = env_or("SHELL", "/bin/sh");
  std::cerr << "entering " << model << " environment in " << ext->manifest().directory.string() << "\n";
  if (::chdir(ext->manifest().directory.c_str()) != 0) {
    std::cerr << "cannot enter " << ext->manifest().directory.string() << "\n";
    return kExitFailures;
  }
  char* argv[] = {shell.data(), nullptr};
  ::execve(shell.c_str(), argv, c_env.data());
  std::cerr << "cannot start " << shell << "\n";
  return kExitFailures;
}

int cmd_version() {
  std::cout << "salrun " << SALRUN_VERSION << " (wire protocol " << kProtocolVersion << ")\n";
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::ChecksumMismatch:
    case Errc::NetworkError:
      return kExitFailures;
    default:
      return kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run saliency models over image directories with reproducible, layered parameters."};
  app.require_subcommand(1);
  app.fallthrough();

  Locations loc;
  app.add_option("--models-dir", loc.models_dir, "Model registry root (env SALRUN_MODELS_DIR)");
  app.add_option("--config", loc.config, "Global parameter file (env SALRUN_CONFIG)");
  app.add_option("--cache-dir", loc.cache_dir, "Downloaded model files (env SALRUN_CACHE_DIR)");

  std::string info_target;
  auto* info = app.add_subcommand("info", "Show registered models, or parameters of 'global' or one model");
  info->add_option("target", info_target, "'global' or a model name");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run model(s) on the images in a directory");
  run->add_option("experiment", run_args.experiment, "YAML experiment file");
  run->add_option("--model", run_args.model, "Model for a single ad-hoc run");
  run->add_option("--input", run_args.input, "Input image directory (ad-hoc run)");
  run->add_option("--output", run_args.output, "Output directory (ad-hoc run)");
  run->add_option("--param", run_args.params, "Run-level parameter key=value (repeatable)");
  run->add_option("--workers", run_args.workers, "Images processed concurrently per run")
      ->check(CLI::PositiveNumber);
  run->add_flag("--skip-existing", run_args.skip_existing, "Keep outputs that already exist");
  run->add_flag("--f32raw", run_args.f32raw, "Also write lossless .f32 maps");
  run->add_flag("--keep-artifacts", loc.keep_artifacts, "Keep external-model working directories");

  std::string dl_model;
  bool dl_all = false;
  auto* download = app.add_subcommand("download", "Download model files");
  download->add_option("model", dl_model, "Model name");
  download->add_flag("--all", dl_all, "Every registered model");

  std::string clean_model;
  bool clean_all = false;
  auto* clean = app.add_subcommand("clean", "Delete downloaded model files");
  clean->add_option("model", clean_model, "Model name");
  clean->add_flag("--all", clean_all, "Every registered model");

  std::string shell_model;
  auto* shell = app.add_subcommand("shell", "Open a shell in an external model's environment");
  shell->add_option("model", shell_model, "Model name")->required();

  auto* version = app.add_subcommand("version", "Print version information");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*info) return cmd_info(loc, info_target);
    if (*run) return cmd_run(loc, run_args);
    if (*download || *clean) {
      const bool is_dl = download->parsed();
      const std::string& model = is_dl ? dl_model : clean_model;
      const bool all = is_dl ? dl_all : clean_all;
      if (model.empty() == !all) {
        std::cerr << (is_dl ? "download" : "clean") << ": give a model name or --all\n";
        return kExitUsage;
      }
      return is_dl ? cmd_download(loc, model, all) : cmd_clean(loc, model, all);
    }
    if (*shell) return cmd_shell(loc, shell_model);
    if (*version) return cmd_version();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
