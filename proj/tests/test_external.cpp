#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include "salrun/color.hpp"
#include "salrun/experiment.hpp"
#include "salrun/external.hpp"
#include "salrun/mapops.hpp"
#include "salrun/subprocess.hpp"
#include "test_support.hpp"

using namespace salrun;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

ExternalModelHandle stub_handle(const TempDir& tmp, const std::string& name,
                                std::map<std::string, std::string> env = {}, double timeout_s = 30.0) {
  testing::install_stub_model(tmp / "models", name, env, timeout_s);
  return make_external_handle(load_manifest(tmp / "models" / name / "manifest.json"), tmp / "cache");
}

Errc invoke_code(const ExternalModelHandle& h, const Image& img, const fs::path& work) {
  try {
    invoke_external(h, img, {}, work);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::InvalidInput;
}

bool empty_dir(const fs::path& p) { return !fs::exists(p) || fs::is_empty(p); }

}  // namespace

TEST_CASE("request and response records") {
  InvocationRequest req;
  req.image_path = "/tmp/a.png";
  req.output_path = "/tmp/a.f32";
  req.params = {{"smooth_size", std::int64_t{9}}, {"color_space", std::string("LAB")}, {"smooth_std", 3.0}};
  const std::string line = encode_request(req);
  CHECK(line.back() == '\n');
  CHECK(std::count(line.begin(), line.end(), '\n') == 1);
  const InvocationRequest back = decode_request(line);
  CHECK(back.protocol_version == 1);
  CHECK(back.image_path == req.image_path);
  CHECK(back.params == req.params);

  const auto ok = decode_response(R"({"status":"ok","map_path":"/x.f32","future_field":[1,2]})", "M");
  CHECK(ok.status == InvocationResponse::Status::Ok);
  CHECK(ok.map_path == fs::path("/x.f32"));

  for (const char* bad : {"garbage", R"({"status":"maybe"})", R"({"status":"ok"})", "[]"}) {
    try {
      decode_response(bad, "MyModel");
      FAIL("expected ProtocolError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ProtocolError);
      CHECK(std::string(e.what()).find("MyModel") != std::string::npos);
    }
  }
}

TEST_CASE("stub model round trip") {
  TempDir tmp;
  const auto h = stub_handle(tmp, "Stub");
  std::mt19937 rng(1);
  const Image img = testing::random_image(rng, 4, 4);
  const Plane<double> map = invoke_external(h, img, {}, tmp / "work");
  CHECK(map.rows() == 4);
  CHECK(map.cols() == 4);
  const Plane<double> luma = convert_color(img, ColorSpace::Gray).channels[0];
  CHECK((map - luma).abs().maxCoeff() < 1e-6);
  CHECK(empty_dir(tmp / "work"));
}

TEST_CASE("keep_artifacts retains the working directory") {
  TempDir tmp;
  const auto h = stub_handle(tmp, "Stub");
  invoke_external(h, Image::filled(2, 2, 3, ColorSpace::RGB, 0.5), {}, tmp / "work", true);
  REQUIRE(fs::exists(tmp / "work"));
  int n = 0;
  for (const auto& d : fs::directory_iterator(tmp / "work")) {
    ++n;
    CHECK(fs::exists(d.path() / "input.png"));
    CHECK(fs::exists(d.path() / "output.f32"));
  }
  CHECK(n == 1);
}

TEST_CASE("failure modes") {
  TempDir tmp;
  const Image img = Image::filled(3, 3, 3, ColorSpace::RGB, 0.5);
  CHECK(invoke_code(stub_handle(tmp, "G", {{"STUB_MODE", "garbage"}}), img, tmp / "w") == Errc::ProtocolError);
  CHECK(invoke_code(stub_handle(tmp, "E", {{"STUB_MODE", "error"}}), img, tmp / "w") == Errc::ModelError);
  CHECK(invoke_code(stub_handle(tmp, "E0", {{"STUB_MODE", "error_exit0"}}), img, tmp / "w") == Errc::ModelError);
  CHECK(invoke_code(stub_handle(tmp, "B", {{"STUB_MODE", "bad_map"}}), img, tmp / "w") == Errc::MapFormatError);
  CHECK(empty_dir(tmp / "w"));

  testing::write_text(tmp / "models/Missing/manifest.json",
                      R"({"name":"Missing","long_name":"m","citation":"c","model_type":"external",
                          "launch":{"command":["/nonexistent/binary"]}})");
  const auto missing = make_external_handle(load_manifest(tmp / "models/Missing/manifest.json"), tmp / "cache");
  CHECK(invoke_code(missing, img, tmp / "w") == Errc::LaunchError);
}

TEST_CASE("error messages surface the model's own message") {
  TempDir tmp;
  try {
    invoke_external(stub_handle(tmp, "E", {{"STUB_MODE", "error"}}), Image::filled(2, 2, 3, ColorSpace::RGB, 0.1),
                    {}, tmp / "w");
    FAIL("expected ModelError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("stub failure") != std::string::npos);
  }
}

TEST_CASE("timeout kills the whole process group") {
  TempDir tmp;
  const auto h = stub_handle(tmp, "Slow", {{"STUB_MODE", "sleep"}, {"STUB_SLEEP_S", "30"}}, 0.5);
  const auto start = std::chrono::steady_clock::now();
  CHECK(invoke_code(h, Image::filled(2, 2, 3, ColorSpace::RGB, 0.5), tmp / "w") == Errc::Timeout);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
  CHECK(testing::child_process_count() == 0);
  // The stub forks a sleeper; neither it nor the stub may survive.
  const std::string marker = (tmp / "models" / "Slow").string();
  for (int i = 0; i < 50 && testing::processes_with_cmdline(marker) > 0; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  CHECK(testing::processes_with_cmdline(marker) == 0);
  CHECK(empty_dir(tmp / "w"));
}

TEST_CASE("conflicting environments stay isolated") {
  TempDir tmp;
  const auto a = stub_handle(tmp, "EnvA", {{"STUB_MODE", "check_env"}, {"STUB_EXPECT_NAME", "MODEL_HOME"},
                                           {"STUB_EXPECT_VALUE", "alpha"}, {"MODEL_HOME", "alpha"}});
  const auto b = stub_handle(tmp, "EnvB", {{"STUB_MODE", "check_env"}, {"STUB_EXPECT_NAME", "MODEL_HOME"},
                                           {"STUB_EXPECT_VALUE", "beta"}, {"MODEL_HOME", "beta"}});
  const Image img = Image::filled(3, 3, 3, ColorSpace::RGB, 0.5);
  for (int i = 0; i < 2; ++i) {
    CHECK_NOTHROW(invoke_external(a, img, {}, tmp / "w"));
    CHECK_NOTHROW(invoke_external(b, img, {}, tmp / "w"));
  }
  CHECK(a.environment().at("MODEL_HOME") == "alpha");
  CHECK(b.environment().at("MODEL_HOME") == "beta");
  CHECK(a.environment().count("STUB_MODE") == 1);
}

TEST_CASE("launch placeholders are substituted") {
  TempDir tmp;
  const auto h = stub_handle(tmp, "Stub");
  const auto cmd = h.command();
  REQUIRE(cmd.size() == 2);
  CHECK(cmd[1] == fs::absolute(tmp / "models" / "Stub").string());
  CHECK(h.environment().at("SALRUN_ASSET_DIR") == fs::absolute(tmp / "cache" / "Stub").string());
}

TEST_CASE("external models receive RGB plus a concrete color space") {
  TempDir tmp;
  testing::install_stub_model(tmp / "models", "Stub");
  RegistryOptions opts;
  opts.models_dir = tmp / "models";
  opts.cache_dir = tmp / "cache";
  opts.work_root = tmp / "work";
  const Registry reg = Registry::load(opts);
  const auto model = reg.get("Stub");
  CHECK(model->receives_rgb());
  CHECK(model->max_concurrency() == 1);
  const GlobalConfig g = testing::shipped_global_config();
  const ResolvedParams rp = resolve(model->manifest(), g, {}, {{"scale_output", std::string("none")},
                                                                {"do_smoothing", std::string("none")}});
  std::mt19937 rng(5);
  const Image img = testing::random_image(rng, 6, 5);
  const SaliencyMap out = run_pipeline(*model, img, rp);
  CHECK((out.values - convert_color(img, ColorSpace::Gray).channels[0]).abs().maxCoeff() < 1e-6);
}

TEST_CASE("border-trimmed outputs are padded back to input size") {
  TempDir tmp;
  testing::install_stub_model(tmp / "models", "Trim", {{"STUB_MODE", "trim"}, {"STUB_TRIM", "2"}}, 30.0,
                              R"(, "output_trim": {"top": 2, "bottom": 2, "left": 2, "right": 2})");
  RegistryOptions opts;
  opts.models_dir = tmp / "models";
  opts.cache_dir = tmp / "cache";
  opts.work_root = tmp / "work";
  const Registry reg = Registry::load(opts);
  const GlobalConfig g = testing::shipped_global_config();
  const auto model = reg.get("Trim");
  const ResolvedParams rp = resolve(model->manifest(), g, {}, {{"scale_output", std::string("none")},
                                                                {"do_smoothing", std::string("none")}});
  std::mt19937 rng(7);
  const Image img = testing::random_image(rng, 9, 8);
  const SaliencyMap out = run_pipeline(*model, img, rp);
  REQUIRE(out.height() == 9);
  REQUIRE(out.width() == 8);
  const Plane<double> luma = convert_color(img, ColorSpace::Gray).channels[0];
  CHECK(std::abs(out.values(0, 0) - luma(2, 2)) < 1e-6);
  CHECK(std::abs(out.values(4, 4) - luma(4, 4)) < 1e-6);
  CHECK(std::abs(out.values(8, 7) - luma(6, 5)) < 1e-6);
}

TEST_CASE("run_process basics") {
  TempDir tmp;
  const auto r = run_process({"sh", "-c", "cat; echo err >&2; exit 3"}, {{"PATH", "/usr/bin:/bin"}}, tmp.path(),
                             "hello", std::chrono::seconds(5));
  CHECK(r.out == "hello");
  CHECK(r.err == "err\n");
  CHECK(r.exit_code == 3);
  const auto env = run_process({"sh", "-c", "echo $ONLY"}, {{"PATH", "/usr/bin:/bin"}, {"ONLY", "x"}}, tmp.path(),
                               "", std::chrono::seconds(5));
  CHECK(env.out == "x\n");
  CHECK_THROWS_AS(run_process({"definitely-not-a-program-xyz"}, {}, tmp.path(), "", std::chrono::seconds(1)),
                  Error);
  CHECK(testing::child_process_count() == 0);
}

TEST_CASE("model-specific parameters reach the external model") {
  TempDir tmp;
  testing::install_stub_model(tmp / "models", "Contrast", {{"STUB_MODE", "contrast"}}, 30.0,
                              R"(, "parameters": {"contrast_window": {"default": 3, "description": "Box size.",
                                   "valid_values": "Odd integer.", "constraint": {"type": "int", "min_exclusive": 0, "odd": true}}})");
  RegistryOptions opts;
  opts.models_dir = tmp / "models";
  opts.cache_dir = tmp / "cache";
  opts.work_root = tmp / "work";
  const Registry reg = Registry::load(opts);
  const auto model = reg.get("Contrast");
  const GlobalConfig g = testing::shipped_global_config();
  std::mt19937 rng(11);
  const Image img = testing::random_image(rng, 12, 10);
  const Plane<double> luma = convert_color(img, ColorSpace::Gray).channels[0];
  for (int window : {3, 5}) {
    const ResolvedParams rp = resolve(model->manifest(), g, {},
                                      {{"contrast_window", std::int64_t{window}},
                                       {"scale_output", std::string("none")},
                                       {"do_smoothing", std::string("none")}});
    const Eigen::ArrayXd box = Eigen::ArrayXd::Constant(window, 1.0 / window);
    const Plane<double> expected = (luma - convolve_separable_replicate<double>(luma, box)).abs();
    const SaliencyMap out = run_pipeline(*model, img, rp);
    CHECK((out.values - expected).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("the stub rejects an unknown protocol version") {
  TempDir tmp;
  const std::string line = R"({"protocol_version": 99, "image_path": "/x.png", "params": {}, "output_path": "/x.f32"})";
  const auto r = run_process({testing::stub_model_binary().string()}, {}, tmp.path(), line + "\n",
                             std::chrono::seconds(10));
  CHECK(r.exit_code != 0);
  const auto resp = decode_response(r.out, "stub");
  CHECK(resp.status == InvocationResponse::Status::Error);
  CHECK(resp.error_message.value().find("unsupported protocol_version 99") != std::string::npos);
}
