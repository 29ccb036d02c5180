#include "salrun/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "salrun/dct.hpp"
#include "salrun/external.hpp"
#include "salrun/log.hpp"
#include "salrun/mapops.hpp"

namespace salrun {

namespace fs = std::filesystem;

SaliencyMap NativeModel::compute(const Image& img, const ResolvedParams& params) const {
  SaliencyMap map;
  map.values = fn_(img, params);
  map.model_name = manifest_.name;
  map.resolved_params = params;
  if (!map.values.allFinite())
    throw Error(Errc::ModelError, manifest_.name + " produced non-finite values");
  return map;
}

Plane<double> cg_compute(const Image& img, const ResolvedParams& params) {
  const double rho = params.real("center_sigma_ratio");
  const Eigen::Index h = img.height(), w = img.width();
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double sx = rho * static_cast<double>(w), sy = rho * static_cast<double>(h);
  Plane<double> out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    const double dy = (static_cast<double>(y) - cy) / sy;
    for (Eigen::Index x = 0; x < w; ++x) {
      const double dx = (static_cast<double>(x) - cx) / sx;
      out(y, x) = std::exp(-(dx * dx + dy * dy) / 2.0);
    }
  }
  return out;
}

Plane<double> image_signature(const Plane<double>& channel) {
  const Plane<double> coeffs = dct2(channel);
  // Coefficients within rounding noise of zero count as zero.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * coeffs.abs().maxCoeff();
  const Plane<double> signs =
      coeffs.unaryExpr([floor](double c) { return double((c > floor) - (c < -floor)); });
  return idct2(signs).square();
}

Plane<double> imsig_compute(const Image& img, const ResolvedParams& params) {
  const auto max_side = params.integer("working_max_side");
  const Eigen::Index longest = std::max(img.height(), img.width());
  Eigen::Index h = img.height(), w = img.width();
  if (longest > max_side) {
    const double scale = static_cast<double>(max_side) / static_cast<double>(longest);
    h = std::max<Eigen::Index>(1, std::lround(static_cast<double>(img.height()) * scale));
    w = std::max<Eigen::Index>(1, std::lround(static_cast<double>(img.width()) * scale));
  }
  Plane<double> total = Plane<double>::Zero(h, w);
  for (const auto& channel : img.channels) {
    total += image_signature(h == img.height() && w == img.width() ? channel
                                                                    : resample_bilinear(channel, h, w));
  }
  return total;
}

Plane<double> uniform_compute(const Image& img, const ResolvedParams&) {
  return Plane<double>::Constant(img.height(), img.width(), 0.5);
}

const std::map<std::string, ComputeFn>& builtin_models() {
  static const std::map<std::string, ComputeFn> models = {
      {"cG", cg_compute}, {"IMSIG", imsig_compute}, {"uniform", uniform_compute}};
  return models;
}

Registry Registry::load(const RegistryOptions& options) {
  Registry reg;
  reg.options_ = options;
  std::error_code ec;
  if (!fs::is_directory(options.models_dir, ec))
    throw Error(Errc::FileNotFound, "models directory " + options.models_dir.string());

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(options.models_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::is_regular_file(manifest_path, ec)) continue;
    ModelManifest m = load_manifest(manifest_path);
    if (m.name != dir.filename().string())
      throw Error(Errc::SchemaError, manifest_path.string() + ": name '" + m.name +
                                         "' does not match its directory");
    if (m.model_type == ModelType::Native) {
      const auto& builtins = builtin_models();
      auto it = builtins.find(m.name);
      if (it == builtins.end()) {
        warn("skipping native model '" + m.name + "': no built-in implementation");
        continue;
      }
      reg.add(std::make_shared<NativeModel>(std::move(m), it->second));
    } else {
      auto handle = make_external_handle(m, options.cache_dir);
      reg.add(std::make_shared<ExternalModel>(std::move(handle), options.work_root,
                                              options.keep_artifacts));
    }
  }
  return reg;
}

void Registry::add(std::shared_ptr<const Model> model) {
  const std::string name = model->name();
  if (!models_.emplace(name, std::move(model)).second)
    throw Error(Errc::SchemaError, "duplicate model name '" + name + "'");
}

std::vector<const ModelManifest*> Registry::list() const {
  std::vector<const ModelManifest*> out;
  for (const auto& [_, m] : models_) out.push_back(&m->manifest());
  return out;
}

std::shared_ptr<const Model> Registry::get(const std::string& name) const {
  auto it = models_.find(name);
  if (it == models_.end()) throw Error(Errc::UnknownModel, "no model named '" + name + "'");
  return it->second;
}

std::string describe(const std::string& target, const Registry& registry, const GlobalConfig& global) {
  if (target == "global") return describe_global(global);
  return describe_model(registry.get(target)->manifest());
}

}  // namespace salrun
