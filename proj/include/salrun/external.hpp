#pragma once

// Externally implemented models run as isolated child processes speaking the
// line-delimited JSON protocol below (version 1).
//
//   request  (one line on the child's stdin)
//     {"protocol_version": 1, "image_path": "/abs/in.png",
//      "params": {"name": value, ...}, "output_path": "/abs/out.f32"}
//   response (one line on the child's stdout)
//     {"status": "ok", "map_path": "/abs/out.f32", "model_version": "1.2"}
//     {"status": "error", "error_message": "..."}
//
// The image is an 8-bit RGB PNG; the map must be an f32raw file. Exit code 0 is
// required for an ok response to be honored. Unknown fields are ignored.

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "salrun/models.hpp"

namespace salrun {

inline constexpr int kProtocolVersion = 1;

struct InvocationRequest {
  int protocol_version = kProtocolVersion;
  std::filesystem::path image_path;
  std::map<std::string, Value> params;
  std::filesystem::path output_path;
};

struct InvocationResponse {
  enum class Status { Ok, Error } status = Status::Error;
  std::optional<std::filesystem::path> map_path;
  std::optional<std::string> error_message;
  std::optional<std::string> model_version;
};

std::string encode_request(const InvocationRequest& req);
InvocationRequest decode_request(std::string_view line);
std::string encode_response(const InvocationResponse& resp);
/// Throws ProtocolError mentioning `model_name` for anything that is not a valid response.
InvocationResponse decode_response(std::string_view line, const std::string& model_name);

struct ExternalModelHandle {
  ModelManifest manifest;
  std::filesystem::path asset_dir;
  std::chrono::milliseconds timeout{300'000};

  /// launch.command with {model_dir} and {asset_dir} substituted.
  std::vector<std::string> command() const;
  /// Environment for the child: PATH and HOME from the parent, model and asset
  /// locations, then the manifest's own mapping.
  std::map<std::string, std::string> environment() const;
};

ExternalModelHandle make_external_handle(const ModelManifest& manifest,
                                         const std::filesystem::path& cache_dir);

/// Runs one request in a fresh working directory under `work_root`. The
/// directory is removed afterwards unless `keep_artifacts` is set.
Plane<double> invoke_external(const ExternalModelHandle& handle, const Image& img,
                              const ResolvedParams& params, const std::filesystem::path& work_root,
                              bool keep_artifacts = false);

class ExternalModel final : public Model {
 public:
  ExternalModel(ExternalModelHandle handle, std::filesystem::path work_root, bool keep_artifacts)
      : handle_(std::move(handle)), work_root_(std::move(work_root)), keep_(keep_artifacts) {}
  const ModelManifest& manifest() const override { return handle_.manifest; }
  SaliencyMap compute(const Image& img, const ResolvedParams& params) const override;
  int max_concurrency() const override { return 1; }
  bool receives_rgb() const override { return true; }
  const ExternalModelHandle& handle() const { return handle_; }

 private:
  ExternalModelHandle handle_;
  std::filesystem::path work_root_;
  bool keep_;
  mutable std::mutex in_flight_;
};

}  // namespace salrun
