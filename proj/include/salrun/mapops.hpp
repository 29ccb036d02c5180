#pragma once

// Post-processing applied to every raw model output, in this order:
// fit_to_dims (input dimensions) -> smooth -> rescale_values.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <variant>

#include "salrun/image.hpp"
#include "salrun/params.hpp"

namespace salrun {

template <typename Scalar>
struct Kernel2D {
  int size = 1;
  Plane<Scalar> weights;
};

/// Normalized, sampled 1-D Gaussian of odd length `size`.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> gaussian_kernel_1d(int size, Scalar std) {
  if (size < 1 || size % 2 == 0 || !(std > Scalar(0)))
    throw Error(Errc::InvalidInput, "gaussian kernel needs odd size >= 1 and std > 0");
  const int r = size / 2;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> g(size);
  for (int i = 0; i < size; ++i) {
    const Scalar d = Scalar(i - r);
    g(i) = std::exp(-d * d / (Scalar(2) * std * std));
  }
  return g / g.sum();
}

/// Sampled 2-D Gaussian normalized to unit sum.
template <typename Scalar>
Kernel2D<Scalar> gaussian_kernel(int size, Scalar std) {
  if (size < 1 || size % 2 == 0 || !(std > Scalar(0)))
    throw Error(Errc::InvalidInput, "gaussian kernel needs odd size >= 1 and std > 0");
  const int r = size / 2;
  Plane<Scalar> w(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const Scalar dy = Scalar(i - r), dx = Scalar(j - r);
      w(i, j) = std::exp(-(dx * dx + dy * dy) / (Scalar(2) * std * std));
    }
  }
  return {size, w / w.sum()};
}

/// Separable convolution with edge-clamped (replicate) borders.
template <typename Scalar>
Plane<Scalar> convolve_separable_replicate(const Plane<Scalar>& src,
                                           const Eigen::Array<Scalar, Eigen::Dynamic, 1>& k) {
  const Eigen::Index h = src.rows(), w = src.cols();
  const Eigen::Index r = k.size() / 2;
  auto clamp = [](Eigen::Index i, Eigen::Index n) { return std::clamp<Eigen::Index>(i, 0, n - 1); };

  Plane<Scalar> rows(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      Scalar acc(0);
      for (Eigen::Index t = -r; t <= r; ++t) acc += k(t + r) * src(y, clamp(x + t, w));
      rows(y, x) = acc;
    }
  }
  Plane<Scalar> out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      Scalar acc(0);
      for (Eigen::Index t = -r; t <= r; ++t) acc += k(t + r) * rows(clamp(y + t, h), x);
      out(y, x) = acc;
    }
  }
  return out;
}

inline SaliencyMap smooth(const SaliencyMap& map, const EffectivePipelineSettings& settings) {
  if (!settings.smoothing || settings.smoothing->size == 1) return map;
  SaliencyMap out = map;
  out.values = convolve_separable_replicate<double>(
      map.values, gaussian_kernel_1d<double>(settings.smoothing->size, settings.smoothing->std));
  return out;
}

template <typename Scalar>
Plane<Scalar> rescale_plane(const Plane<Scalar>& v, ScaleMode mode, Scalar lo, Scalar hi) {
  switch (mode) {
    case ScaleMode::None:
      return v;
    case ScaleMode::MinMax: {
      if (!(lo < hi)) throw Error(Errc::InvalidInput, "min-max scaling needs scale_min < scale_max");
      const Scalar vmin = v.minCoeff(), vmax = v.maxCoeff();
      if (!(vmax > vmin)) return Plane<Scalar>::Constant(v.rows(), v.cols(), lo);
      Plane<Scalar> out = (v - vmin) * ((hi - lo) / (vmax - vmin)) + lo;
      // Pin the extremes so floating-point rounding cannot leave the range.
      return out.max(lo).min(hi);
    }
    case ScaleMode::Normalized: {
      const Plane<Scalar> shifted = v - v.minCoeff();
      const Scalar total = shifted.sum();
      if (!(total > Scalar(0)))
        return Plane<Scalar>::Constant(v.rows(), v.cols(), Scalar(1) / Scalar(v.size()));
      return shifted / total;
    }
  }
  return v;
}

inline SaliencyMap rescale_values(const SaliencyMap& map, ScaleMode mode, double scale_min,
                                  double scale_max) {
  SaliencyMap out = map;
  out.values = rescale_plane<double>(map.values, mode, scale_min, scale_max);
  return out;
}

struct RescaleBilinear {};

struct PadReplicate {
  int top = 0, bottom = 0, left = 0, right = 0;
};

using FitPolicy = std::variant<RescaleBilinear, PadReplicate>;

/// Bilinear resampling with corner-aligned sample positions: output index i maps to
/// source coordinate i * (n_src - 1) / (n_dst - 1); a single output sample maps to the center.
template <typename Scalar>
Plane<Scalar> resample_bilinear(const Plane<Scalar>& src, Eigen::Index out_h, Eigen::Index out_w) {
  if (out_h <= 0 || out_w <= 0) throw Error(Errc::InvalidInput, "resample target must be non-empty");
  const Eigen::Index h = src.rows(), w = src.cols();
  auto coord = [](Eigen::Index i, Eigen::Index n_src, Eigen::Index n_dst) {
    if (n_dst == 1) return Scalar(n_src - 1) / Scalar(2);
    return Scalar(i) * Scalar(n_src - 1) / Scalar(n_dst - 1);
  };
  Plane<Scalar> out(out_h, out_w);
  for (Eigen::Index y = 0; y < out_h; ++y) {
    const Scalar sy = coord(y, h, out_h);
    const Eigen::Index y0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(sy)), h - 1);
    const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, h - 1);
    const Scalar fy = sy - Scalar(y0);
    for (Eigen::Index x = 0; x < out_w; ++x) {
      const Scalar sx = coord(x, w, out_w);
      const Eigen::Index x0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(sx)), w - 1);
      const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, w - 1);
      const Scalar fx = sx - Scalar(x0);
      const Scalar top = src(y0, x0) * (Scalar(1) - fx) + src(y0, x1) * fx;
      const Scalar bottom = src(y1, x0) * (Scalar(1) - fx) + src(y1, x1) * fx;
      out(y, x) = top * (Scalar(1) - fy) + bottom * fy;
    }
  }
  return out;
}

template <typename Scalar>
Plane<Scalar> pad_replicate(const Plane<Scalar>& src, const PadReplicate& pad) {
  const Eigen::Index h = src.rows() + pad.top + pad.bottom;
  const Eigen::Index w = src.cols() + pad.left + pad.right;
  Plane<Scalar> out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    const Eigen::Index sy = std::clamp<Eigen::Index>(y - pad.top, 0, src.rows() - 1);
    for (Eigen::Index x = 0; x < w; ++x) {
      out(y, x) = src(sy, std::clamp<Eigen::Index>(x - pad.left, 0, src.cols() - 1));
    }
  }
  return out;
}

inline SaliencyMap fit_to_dims(const SaliencyMap& map, Eigen::Index target_h, Eigen::Index target_w,
                               const FitPolicy& policy) {
  SaliencyMap out = map;
  if (const auto* pad = std::get_if<PadReplicate>(&policy)) {
    if (pad->top < 0 || pad->bottom < 0 || pad->left < 0 || pad->right < 0 ||
        map.height() + pad->top + pad->bottom != target_h ||
        map.width() + pad->left + pad->right != target_w) {
      throw Error(Errc::DimensionMismatch,
                  "map " + std::to_string(map.height()) + "x" + std::to_string(map.width()) +
                      " plus padding does not reach " + std::to_string(target_h) + "x" +
                      std::to_string(target_w));
    }
    out.values = pad_replicate(map.values, *pad);
    return out;
  }
  if (map.height() == target_h && map.width() == target_w) return out;
  out.values = resample_bilinear(map.values, target_h, target_w);
  return out;
}

}  // namespace salrun
