// Protocol-v1 external model for tests. Behavior is selected by STUB_MODE:
//   luma (default)  map = Rec. 601 luma of the input
//   contrast        |luma - box mean over contrast_window|, replicate borders
//   trim            luma with STUB_TRIM pixels cut from every side
//   garbage         prints a non-JSON line
//   error           error response, exit 1
//   error_exit0     error response, exit 0
//   bad_map         ok response pointing at a malformed map
//   sleep           sleeps STUB_SLEEP_S seconds (plus a forked sleeper), then luma
//   check_env       requires $STUB_EXPECT_NAME == $STUB_EXPECT_VALUE and an empty cwd

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include "salrun/color.hpp"
#include "salrun/external.hpp"
#include "salrun/image_io.hpp"

using namespace salrun;
namespace fs = std::filesystem;

namespace {

std::string env(const char* key, const std::string& fallback = "") {
  const char* v = std::getenv(key);
  return v ? v : fallback;
}

int respond_error(const std::string& message, int code) {
  InvocationResponse resp;
  resp.status = InvocationResponse::Status::Error;
  resp.error_message = message;
  std::cout << encode_response(resp) << std::flush;
  return code;
}

Plane<double> luma(const Image& img) { return convert_color(img, ColorSpace::Gray).channels[0]; }

Plane<double> contrast(const Image& img, int window) {
  const Plane<double> l = luma(img);
  const Eigen::Index h = l.rows(), w = l.cols(), r = window / 2;
  Plane<double> out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double sum = 0.0;
      for (Eigen::Index dy = -r; dy <= r; ++dy)
        for (Eigen::Index dx = -r; dx <= r; ++dx)
          sum += l(std::clamp<Eigen::Index>(y + dy, 0, h - 1), std::clamp<Eigen::Index>(x + dx, 0, w - 1));
      out(y, x) = std::abs(l(y, x) - sum / double(window * window));
    }
  }
  return out;
}

}  // namespace

int main() {
  std::string line;
  if (!std::getline(std::cin, line)) return respond_error("no request", 1);
  InvocationRequest req;
  try {
    req = decode_request(line);
  } catch (const std::exception& e) {
    return respond_error(std::string("malformed request: ") + e.what(), 1);
  }
  if (req.protocol_version != kProtocolVersion)
    return respond_error("unsupported protocol_version " + std::to_string(req.protocol_version), 1);

  const std::string mode = env("STUB_MODE", "luma");
  if (mode == "garbage") {
    std::cout << "this is not a response\n";
    return 0;
  }
  if (mode == "error") return respond_error("stub failure", 1);
  if (mode == "error_exit0") return respond_error("stub failure", 0);
  if (mode == "sleep") {
    const double seconds = std::stod(env("STUB_SLEEP_S", "30"));
    if (::fork() == 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
      ::_exit(0);
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  }
  if (mode == "check_env") {
    const std::string name = env("STUB_EXPECT_NAME");
    if (env(name.c_str()) != env("STUB_EXPECT_VALUE"))
      return respond_error("environment variable " + name + " is '" + env(name.c_str()) + "'", 1);
    for (const auto& entry : fs::directory_iterator(fs::current_path())) {
      if (entry.path().filename() != "input.png")
        return respond_error("foreign file in working directory: " + entry.path().string(), 1);
    }
    std::ofstream(fs::current_path() / "marker") << name;
  }

  Image img;
  try {
    img = load_image(req.image_path);
  } catch (const std::exception& e) {
    return respond_error(e.what(), 1);
  }

  Plane<double> map;
  if (mode == "contrast") {
    int window = 9;
    if (auto it = req.params.find("contrast_window"); it != req.params.end())
      window = static_cast<int>(std::get<std::int64_t>(it->second));
    map = contrast(img, window);
  } else if (mode == "trim") {
    const int t = std::stoi(env("STUB_TRIM", "1"));
    const Plane<double> full = luma(img);
    map = full.block(t, t, full.rows() - 2 * t, full.cols() - 2 * t);
  } else {
    map = luma(img);
  }

  if (mode == "bad_map") {
    std::ofstream(req.output_path, std::ios::binary) << "nope";
  } else {
    write_f32raw(map, req.output_path);
  }

  InvocationResponse resp;
  resp.status = InvocationResponse::Status::Ok;
  resp.map_path = req.output_path;
  resp.model_version = "stub-1";
  std::cout << encode_response(resp) << std::flush;
  return 0;
}
