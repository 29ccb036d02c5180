#include "salrun/external.hpp"

#include <cstdlib>
#include <sstream>

#include "json_util.hpp"
#include "salrun/assets.hpp"
#include "salrun/image_io.hpp"
#include "salrun/subprocess.hpp"

namespace salrun {

namespace fs = std::filesystem;
using detail::json;

std::string encode_request(const InvocationRequest& req) {
  json params = json::object();
  for (const auto& [k, v] : req.params) params[k] = detail::value_to_json(v);
  json j = {{"protocol_version", req.protocol_version},
            {"image_path", req.image_path.string()},
            {"params", params},
            {"output_path", req.output_path.string()}};
  return j.dump() + "\n";
}

InvocationRequest decode_request(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ProtocolError, std::string("malformed request: ") + e.what());
  }
  if (!j.is_object() || !j.contains("protocol_version") || !j["protocol_version"].is_number_integer() ||
      !j.contains("image_path") || !j["image_path"].is_string() || !j.contains("output_path") ||
      !j["output_path"].is_string())
    throw Error(Errc::ProtocolError, "request lacks required fields");
  InvocationRequest req;
  req.protocol_version = j["protocol_version"].get<int>();
  req.image_path = j["image_path"].get<std::string>();
  req.output_path = j["output_path"].get<std::string>();
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw Error(Errc::ProtocolError, "params must be an object");
    for (const auto& [k, v] : j["params"].items()) {
      try {
        req.params[k] = detail::value_from_json(v, k);
      } catch (const Error&) {
        throw Error(Errc::ProtocolError, "param '" + k + "' is not a scalar");
      }
    }
  }
  return req;
}

std::string encode_response(const InvocationResponse& resp) {
  json j;
  j["status"] = resp.status == InvocationResponse::Status::Ok ? "ok" : "error";
  if (resp.map_path) j["map_path"] = resp.map_path->string();
  if (resp.error_message) j["error_message"] = *resp.error_message;
  if (resp.model_version) j["model_version"] = *resp.model_version;
  return j.dump() + "\n";
}

InvocationResponse decode_response(std::string_view line, const std::string& model_name) {
  auto fail = [&](const std::string& why) -> Error {
    return Error(Errc::ProtocolError, "model " + model_name + ": " + why);
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    std::string shown(line.substr(0, 120));
    throw fail("malformed response line '" + shown + "'");
  }
  if (!j.is_object() || !j.contains("status") || !j["status"].is_string())
    throw fail("response has no status");
  InvocationResponse resp;
  const std::string status = j["status"].get<std::string>();
  if (status == "ok") {
    resp.status = InvocationResponse::Status::Ok;
  } else if (status == "error") {
    resp.status = InvocationResponse::Status::Error;
  } else {
    throw fail("unknown status '" + status + "'");
  }
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) throw fail(std::string(key) + " must be a string");
    return j[key].get<std::string>();
  };
  if (auto p = opt_string("map_path")) resp.map_path = *p;
  resp.error_message = opt_string("error_message");
  resp.model_version = opt_string("model_version");
  if (resp.status == InvocationResponse::Status::Ok && !resp.map_path)
    throw fail("ok response without map_path");
  return resp;
}

std::vector<std::string> ExternalModelHandle::command() const {
  std::vector<std::string> out;
  auto substitute = [](std::string s, const std::string& key, const std::string& value) {
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size()))
      s.replace(pos, key.size(), value);
    return s;
  };
  for (const auto& arg : manifest.launch->command) {
    out.push_back(substitute(substitute(arg, "{model_dir}", manifest.directory.string()),
                             "{asset_dir}", asset_dir.string()));
  }
  return out;
}

std::map<std::string, std::string> ExternalModelHandle::environment() const {
  std::map<std::string, std::string> env;
  for (const char* key : {"PATH", "HOME", "LANG", "TMPDIR"}) {
    if (const char* v = std::getenv(key)) env[key] = v;
  }
  env["SALRUN_MODEL_DIR"] = manifest.directory.string();
  env["SALRUN_ASSET_DIR"] = asset_dir.string();
  for (const auto& [k, v] : manifest.launch->env) env[k] = v;
  return env;
}

ExternalModelHandle make_external_handle(const ModelManifest& manifest, const fs::path& cache_dir) {
  if (manifest.model_type != ModelType::External || !manifest.launch)
    throw Error(Errc::InvalidInput, manifest.name + " is not an external model");
  ExternalModelHandle h;
  h.manifest = manifest;
  h.asset_dir = fs::absolute(asset_dir(cache_dir, manifest.name));
  h.timeout = std::chrono::milliseconds(static_cast<long long>(manifest.launch->timeout_s * 1000.0));
  return h;
}

namespace {

class WorkDir {
 public:
  WorkDir(const fs::path& root, const std::string& model, bool keep) : keep_(keep) {
    std::error_code ec;
    fs::create_directories(root, ec);
    std::string templ = (fs::absolute(root) / ("salrun-" + model + "-XXXXXX")).string();
    if (!::mkdtemp(templ.data())) throw Error(Errc::IoError, "cannot create work directory in " + root.string());
    path_ = templ;
  }
  ~WorkDir() {
    if (keep_) return;
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  WorkDir(const WorkDir&) = delete;
  WorkDir& operator=(const WorkDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  bool keep_;
};

std::string first_line(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
  }
  return {};
}

std::string tail(const std::string& s, std::size_t n = 400) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

}  // namespace

Plane<double> invoke_external(const ExternalModelHandle& handle, const Image& img,
                              const ResolvedParams& params, const fs::path& work_root,
                              bool keep_artifacts) {
  const std::string& name = handle.manifest.name;
  WorkDir work(work_root, name, keep_artifacts);

  InvocationRequest req;
  req.image_path = work.path() / "input.png";
  req.output_path = work.path() / "output.f32";
  req.params = params.values;
  write_png_rgb(img, req.image_path);

  const ProcessResult result =
      run_process(handle.command(), handle.environment(), work.path(), encode_request(req), handle.timeout);

  if (result.timed_out)
    throw Error(Errc::Timeout, "model " + name + " exceeded " +
                                   std::to_string(handle.timeout.count()) + " ms and was killed");

  const std::string line = first_line(result.out);
  if (result.signaled || result.exit_code != 0) {
    std::string message = "model " + name + " exited with " +
                          (result.signaled ? std::string("a signal") : "code " + std::to_string(result.exit_code));
    try {
      const auto resp = decode_response(line, name);
      if (resp.error_message) message += ": " + *resp.error_message;
    } catch (const Error&) {
      if (!result.err.empty()) message += ": " + tail(result.err);
    }
    throw Error(Errc::ModelError, message);
  }

  if (line.empty()) throw Error(Errc::ProtocolError, "model " + name + " produced no response");
  const InvocationResponse resp = decode_response(line, name);
  if (resp.status == InvocationResponse::Status::Error)
    throw Error(Errc::ModelError, "model " + name + ": " + resp.error_message.value_or("unspecified error"));
  return read_f32raw(*resp.map_path);
}

SaliencyMap ExternalModel::compute(const Image& img, const ResolvedParams& params) const {
  std::lock_guard lock(in_flight_);
  SaliencyMap map;
  map.values = invoke_external(handle_, img, params, work_root_, keep_);
  map.model_name = handle_.manifest.name;
  map.resolved_params = params;
  return map;
}

}  // namespace salrun
