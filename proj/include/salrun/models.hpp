#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "salrun/image.hpp"
#include "salrun/params.hpp"

namespace salrun {

/// Any saliency model the framework can run: an in-process implementation or an
/// isolated external process. compute() receives an image already converted to
/// the effective color space and returns the raw (un-post-processed) map.
class Model {
 public:
  virtual ~Model() = default;
  virtual const ModelManifest& manifest() const = 0;
  virtual SaliencyMap compute(const Image& img, const ResolvedParams& params) const = 0;
  /// Maximum concurrent compute() calls; 0 means unlimited.
  virtual int max_concurrency() const { return 0; }
  /// True when the model takes the RGB image and does its own color conversion,
  /// guided by the concrete color_space value in its parameters.
  virtual bool receives_rgb() const { return false; }
  const std::string& name() const { return manifest().name; }
};

using ComputeFn = std::function<Plane<double>(const Image&, const ResolvedParams&)>;

class NativeModel final : public Model {
 public:
  NativeModel(ModelManifest manifest, ComputeFn fn)
      : manifest_(std::move(manifest)), fn_(std::move(fn)) {}
  const ModelManifest& manifest() const override { return manifest_; }
  SaliencyMap compute(const Image& img, const ResolvedParams& params) const override;

 private:
  ModelManifest manifest_;
  ComputeFn fn_;
};

// Built-in model kernels. Each returns the raw map.

/// Centered anisotropic Gaussian with sigma = center_sigma_ratio * side length.
Plane<double> cg_compute(const Image& img, const ResolvedParams& params);

/// Image signature: per channel (idct2(sign(dct2(I))))^2, summed over channels, at a
/// working resolution whose longer side is at most working_max_side.
Plane<double> imsig_compute(const Image& img, const ResolvedParams& params);

/// Constant 0.5 at input dimensions.
Plane<double> uniform_compute(const Image& img, const ResolvedParams& params);

/// Image-signature core on one plane: (idct2(sign(dct2(x))))^2 with sign(0) = 0.
/// Coefficients within 64·eps of the largest magnitude count as 0.
Plane<double> image_signature(const Plane<double>& channel);

/// Names with an in-process implementation.
const std::map<std::string, ComputeFn>& builtin_models();

struct RegistryOptions {
  std::filesystem::path models_dir;
  std::filesystem::path cache_dir;
  /// Where per-invocation working directories of external models are created.
  std::filesystem::path work_root = std::filesystem::temp_directory_path();
  bool keep_artifacts = false;
};

/// Models discovered under `<models_dir>/<NAME>/manifest.json`; read-only after load.
class Registry {
 public:
  static Registry load(const RegistryOptions& options);

  /// Manifests sorted by model name.
  std::vector<const ModelManifest*> list() const;
  std::shared_ptr<const Model> get(const std::string& name) const;
  bool contains(const std::string& name) const { return models_.count(name) > 0; }
  const RegistryOptions& options() const { return options_; }

  void add(std::shared_ptr<const Model> model);

 private:
  RegistryOptions options_;
  std::map<std::string, std::shared_ptr<const Model>> models_;
};

/// Text for `info`: "global" renders the global table, otherwise a model description.
std::string describe(const std::string& target, const Registry& registry, const GlobalConfig& global);

}  // namespace salrun
