#include <doctest.h>

#include "salrun/mapops.hpp"
#include "test_support.hpp"

using namespace salrun;

namespace {

SaliencyMap map_of(Plane<double> v) { return SaliencyMap{std::move(v), "t", {}}; }

EffectivePipelineSettings smoothing(int size, double std) {
  EffectivePipelineSettings s;
  s.smoothing = GaussianSmoothing{size, std};
  return s;
}

}  // namespace

TEST_CASE("gaussian kernel") {
  const auto k1 = gaussian_kernel<double>(1, 0.3);
  CHECK(k1.weights.size() == 1);
  CHECK(k1.weights(0, 0) == 1.0);

  const auto flat = gaussian_kernel<double>(3, 1e6);
  CHECK((flat.weights - 1.0 / 9.0).abs().maxCoeff() < 1e-6);

  // Scalar oracle: 1 / (sum_{i=-4..4} exp(-i^2 / 18))^2.
  const auto k9 = gaussian_kernel<double>(9, 3.0);
  CHECK(std::abs(k9.weights(4, 4) - 0.023461149262711447) < 1e-12);
  CHECK(std::abs(k9.weights.sum() - 1.0) < 1e-9);
  CHECK((k9.weights - k9.weights.reverse()).abs().maxCoeff() < 1e-15);
  CHECK((k9.weights - k9.weights.transpose()).abs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(gaussian_kernel<double>(4, 1.0), Error);
  CHECK_THROWS_AS(gaussian_kernel<double>(3, 0.0), Error);
}

TEST_CASE("smoothing a constant map is the identity") {
  const auto m = map_of(Plane<double>::Constant(6, 9, 0.37));
  const auto out = smooth(m, smoothing(7, 2.0));
  CHECK((out.values - 0.37).abs().maxCoeff() < 1e-9);
}

TEST_CASE("no smoothing leaves the map bitwise unchanged") {
  std::mt19937 rng(5);
  const auto m = map_of(testing::random_plane(rng, 5, 8));
  const auto out = smooth(m, EffectivePipelineSettings{});
  CHECK((out.values == m.values).all());
}

TEST_CASE("impulse response reproduces the kernel") {
  Plane<double> impulse = Plane<double>::Zero(5, 5);
  impulse(2, 2) = 1.0;
  const auto out = smooth(map_of(impulse), smoothing(3, 1.0));
  const auto k = gaussian_kernel<double>(3, 1.0);
  CHECK((out.values.block(1, 1, 3, 3) - k.weights).abs().maxCoeff() < 1e-9);
  // Hand-evaluated weights for size 3, std 1.
  CHECK(std::abs(out.values(2, 2) - 0.2041799555716581) < 1e-12);
  CHECK(std::abs(out.values(1, 2) - 0.12384140315297397) < 1e-12);
  CHECK(std::abs(out.values(1, 1) - 0.07511360795411151) < 1e-12);
  CHECK(std::abs(out.values.sum() - 1.0) < 1e-6);
}

TEST_CASE("replicate borders avoid edge darkening") {
  Plane<double> step = Plane<double>::Ones(4, 4);
  const auto out = smooth(map_of(step), smoothing(9, 3.0));
  CHECK(out.values.minCoeff() > 1.0 - 1e-12);
}

TEST_CASE("min-max rescaling") {
  Plane<double> v(1, 3);
  v << 0, 2, 4;
  const auto out = rescale_values(map_of(v), ScaleMode::MinMax, 0.0, 1.0);
  CHECK(out.values(0, 0) == 0.0);
  CHECK(out.values(0, 1) == doctest::Approx(0.5));
  CHECK(out.values(0, 2) == 1.0);

  const auto flat = rescale_values(map_of(Plane<double>::Constant(2, 2, 3.0)), ScaleMode::MinMax, 0.0, 1.0);
  CHECK((flat.values == 0.0).all());

  CHECK_THROWS_AS(rescale_values(map_of(v), ScaleMode::MinMax, 1.0, 1.0), Error);
}

TEST_CASE("normalized rescaling") {
  Plane<double> v(1, 3);
  v << 1, 1, 2;
  const auto out = rescale_values(map_of(v), ScaleMode::Normalized, 0.0, 1.0);
  CHECK(out.values(0, 0) == 0.0);
  CHECK(out.values(0, 1) == 0.0);
  CHECK(out.values(0, 2) == 1.0);

  const auto flat = rescale_values(map_of(Plane<double>::Constant(2, 5, 7.0)), ScaleMode::Normalized, 0, 1);
  CHECK((flat.values - 0.1).abs().maxCoeff() < 1e-15);
}

TEST_CASE("mode none is the identity") {
  std::mt19937 rng(9);
  const auto m = map_of(testing::random_plane(rng, 3, 4, -5, 5));
  CHECK((rescale_values(m, ScaleMode::None, 0, 1).values == m.values).all());
}

TEST_CASE("rescaling properties on random maps") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> bound(-10.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = map_of(testing::random_plane(rng, 1 + trial % 7, 1 + trial % 5 + 1, -3, 8));
    double lo = bound(rng), hi = bound(rng);
    if (lo > hi) std::swap(lo, hi);
    const auto mm = rescale_values(m, ScaleMode::MinMax, lo, hi);
    CHECK(std::abs(mm.values.minCoeff() - lo) < 1e-6);
    CHECK(std::abs(mm.values.maxCoeff() - hi) < 1e-6);
    const auto nz = rescale_values(m, ScaleMode::Normalized, 0, 1);
    CHECK(nz.values.minCoeff() >= 0.0);
    CHECK(std::abs(nz.values.sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("fit to dimensions") {
  SUBCASE("identity resample") {
    std::mt19937 rng(2);
    const auto m = map_of(testing::random_plane(rng, 4, 6));
    CHECK((fit_to_dims(m, 4, 6, RescaleBilinear{}).values - m.values).abs().maxCoeff() < 1e-9);
  }
  SUBCASE("1x1 extends to a constant under either policy") {
    const auto m = map_of(Plane<double>::Constant(1, 1, 0.7));
    CHECK((fit_to_dims(m, 3, 3, RescaleBilinear{}).values - 0.7).abs().maxCoeff() < 1e-12);
    const auto padded = fit_to_dims(m, 3, 3, PadReplicate{1, 1, 1, 1});
    CHECK(padded.height() == 3);
    CHECK((padded.values - 0.7).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("bilinear middle column with corner-aligned sampling") {
    Plane<double> v(2, 2);
    v << 0, 1, 0, 1;
    const auto out = fit_to_dims(map_of(v), 2, 3, RescaleBilinear{});
    CHECK(std::abs(out.values(0, 1) - 0.5) < 1e-9);
    CHECK(std::abs(out.values(1, 1) - 0.5) < 1e-9);
    CHECK(out.values(0, 0) == 0.0);
    CHECK(out.values(0, 2) == 1.0);
  }
  SUBCASE("padding replicates borders") {
    Plane<double> v(1, 2);
    v << 0.25, 0.75;
    const auto out = fit_to_dims(map_of(v), 3, 5, PadReplicate{1, 1, 2, 1});
    Plane<double> expected(3, 5);
    expected << 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.25, 0.25, 0.75, 0.75;
    CHECK((out.values == expected).all());
  }
  SUBCASE("inconsistent padding") {
    try {
      fit_to_dims(map_of(Plane<double>::Zero(2, 2)), 5, 5, PadReplicate{1, 1, 1, 1});
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DimensionMismatch);
    }
  }
  SUBCASE("output dimensions always equal the target") {
    std::mt19937 rng(23);
    std::uniform_int_distribution<int> side(1, 40);
    for (int i = 0; i < 100; ++i) {
      const auto m = map_of(testing::random_plane(rng, side(rng), side(rng)));
      const int h = side(rng), w = side(rng);
      const auto out = fit_to_dims(m, h, w, RescaleBilinear{});
      CHECK(out.height() == h);
      CHECK(out.width() == w);
      // Bilinear never overshoots the source range.
      CHECK(out.values.maxCoeff() <= m.values.maxCoeff() + 1e-12);
      CHECK(out.values.minCoeff() >= m.values.minCoeff() - 1e-12);
    }
  }
}

TEST_CASE("min-max preserves the argmax set") {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 30; ++trial) {
    Plane<double> v(6, 6);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = level(rng) * 0.3;
    if (v.maxCoeff() == v.minCoeff()) continue;
    const auto out = rescale_values(map_of(v), ScaleMode::MinMax, 0.0, 1.0);
    CHECK(((v == v.maxCoeff()) == (out.values == out.values.maxCoeff())).all());
  }
}
