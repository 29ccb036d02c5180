#include <doctest.h>

#include <numbers>

#include "salrun/experiment.hpp"
#include "salrun/models.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace salrun;
using testing::TempDir;
using testing::naive_signature;

namespace {

ResolvedParams params_with(std::map<std::string, Value> values) {
  ResolvedParams rp;
  rp.values = std::move(values);
  return rp;
}

Image gray_image(Plane<double> p) { return Image(ColorSpace::Gray, {std::move(p)}); }

Registry shipped_registry(const TempDir& tmp) {
  RegistryOptions opts;
  opts.models_dir = testing::data_dir() / "models";
  opts.cache_dir = tmp / "cache";
  return Registry::load(opts);
}

}  // namespace

TEST_CASE("cG is a centered Gaussian") {
  const auto rp = params_with({{"center_sigma_ratio", 0.25}});
  const Image img = Image::filled(3, 3, 3, ColorSpace::RGB, 0.2);
  const Plane<double> m = cg_compute(img, rp);
  CHECK(m(1, 1) == 1.0);
  // Plug-in oracle: exp(-(1 / (2 * 0.75^2)) * 2) = exp(-16/9).
  CHECK(std::abs(m(0, 0) - 0.1690133154060661) < 1e-12);
  CHECK(std::abs(m(0, 0) - std::exp(-16.0 / 9.0)) < 1e-15);

  const Plane<double> odd = cg_compute(Image::filled(7, 5, 3, ColorSpace::RGB, 0.0), rp);
  CHECK(odd(3, 2) == 1.0);
}

TEST_CASE("cG ignores pixel content and is flip-symmetric") {
  std::mt19937 rng(6);
  const auto rp = params_with({{"center_sigma_ratio", 0.3}});
  const Plane<double> a = cg_compute(testing::random_image(rng, 6, 9), rp);
  const Plane<double> b = cg_compute(testing::random_image(rng, 6, 9), rp);
  CHECK((a == b).all());
  CHECK((a - a.rowwise().reverse()).abs().maxCoeff() < 1e-15);
  CHECK((a - a.colwise().reverse()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("image signature of zeros is zero") {
  const auto rp = params_with({{"working_max_side", std::int64_t{64}}});
  CHECK((imsig_compute(gray_image(Plane<double>::Zero(5, 4)), rp) == 0.0).all());
}

TEST_CASE("image signature matches the direct-sum oracle") {
  std::mt19937 rng(12);
  const auto rp = params_with({{"working_max_side", std::int64_t{64}}});
  for (int trial = 0; trial < 5; ++trial) {
    const Plane<double> x = testing::random_plane(rng, 8, 8);
    CHECK((imsig_compute(gray_image(x), rp) - naive_signature(x)).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("image signature of a constant channel is constant") {
  // DC-only sign pattern: idct2 of a single +1 at (0,0) is 1/sqrt(HW) everywhere.
  const auto rp = params_with({{"working_max_side", std::int64_t{64}}});
  const Plane<double> m = imsig_compute(gray_image(Plane<double>::Constant(4, 6, 0.8)), rp);
  CHECK((m - 1.0 / 24.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("image signature is invariant to positive channel scaling") {
  std::mt19937 rng(13);
  const auto rp = params_with({{"working_max_side", std::int64_t{64}}});
  const Image img = testing::random_image(rng, 9, 12);
  Image scaled = img;
  scaled.channels[1] *= 7.5;
  CHECK((imsig_compute(img, rp) - imsig_compute(scaled, rp)).abs().maxCoeff() < 1e-9);
}

TEST_CASE("image signature works at a bounded resolution") {
  std::mt19937 rng(14);
  const auto rp = params_with({{"working_max_side", std::int64_t{16}}});
  const Plane<double> m = imsig_compute(testing::random_image(rng, 40, 30), rp);
  CHECK(m.rows() == 16);
  CHECK(m.cols() == 12);
  CHECK(m.allFinite());
}

TEST_CASE("uniform stub") {
  CHECK((uniform_compute(Image::filled(4, 4, 3, ColorSpace::RGB, 0.0), {}) == 0.5).all());
  const Plane<double> one = uniform_compute(Image::filled(1, 1, 3, ColorSpace::RGB, 0.0), {});
  CHECK(one.size() == 1);
  CHECK(one(0, 0) == 0.5);
}

TEST_CASE("registry") {
  TempDir tmp;
  const Registry reg = shipped_registry(tmp);
  std::vector<std::string> names;
  for (const auto* m : reg.list()) names.push_back(m->name);
  CHECK(names == std::vector<std::string>{"IMSIG", "cG", "uniform"});
  CHECK(reg.get("cG")->manifest().model_type == ModelType::Native);
  try {
    reg.get("AWS");
    FAIL("expected UnknownModel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownModel);
  }
  const GlobalConfig g = testing::shipped_global_config();
  CHECK(describe("IMSIG", reg, g).find("Image Signature") != std::string::npos);
  CHECK(describe("global", reg, g).find("smooth_prop") != std::string::npos);
  CHECK_THROWS_AS(describe("NOPE", reg, g), Error);
}

TEST_CASE("registry rejects a manifest stored under the wrong directory") {
  TempDir tmp;
  testing::install_native_models(tmp / "models");
  std::filesystem::rename(tmp / "models" / "cG", tmp / "models" / "centre");
  RegistryOptions opts;
  opts.models_dir = tmp / "models";
  opts.cache_dir = tmp / "cache";
  CHECK_THROWS_AS(Registry::load(opts), Error);
}

TEST_CASE("every model keeps input dimensions through the pipeline") {
  TempDir tmp;
  const Registry reg = shipped_registry(tmp);
  const GlobalConfig g = testing::shipped_global_config();
  std::mt19937 rng(21);
  for (const auto* m : reg.list()) {
    const auto model = reg.get(m->name);
    const ResolvedParams rp = resolve(*m, g, {}, {});
    for (auto [h, w] : {std::pair{1, 1}, {7, 5}, {64, 64}, {48, 64}}) {
      const SaliencyMap out = run_pipeline(*model, testing::random_image(rng, h, w), rp);
      CHECK(out.height() == h);
      CHECK(out.width() == w);
      CHECK(out.values.allFinite());
      CHECK(out.values.minCoeff() >= 0.0);
      CHECK(out.values.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("pipeline with no smoothing and no scaling is idempotent") {
  TempDir tmp;
  const Registry reg = shipped_registry(tmp);
  const GlobalConfig g = testing::shipped_global_config();
  const auto model = reg.get("cG");
  const ResolvedParams rp =
      resolve(model->manifest(), g, {}, {{"do_smoothing", std::string("none")}, {"scale_output", std::string("none")}});
  std::mt19937 rng(22);
  const Image img = testing::random_image(rng, 9, 11);
  const SaliencyMap once = run_pipeline(*model, img, rp);
  const SaliencyMap raw = model->compute(img, rp);
  CHECK((once.values == raw.values).all());
}
