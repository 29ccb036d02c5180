#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "salrun/error.hpp"
#include "salrun/value.hpp"

namespace salrun {

enum class ColorSpace { RGB, Gray, YCbCr, LAB, HSV, Default };

std::string_view to_string(ColorSpace cs);
std::optional<ColorSpace> color_space_from_string(std::string_view s);

/// One image channel, row-major so that (row, col) == (y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Planar raster: `channels` holds one Plane per channel, all of equal shape.
template <typename Scalar>
struct BasicImage {
  ColorSpace space = ColorSpace::RGB;
  std::vector<Plane<Scalar>> channels;

  BasicImage() = default;
  BasicImage(ColorSpace cs, std::vector<Plane<Scalar>> planes)
      : space(cs), channels(std::move(planes)) {
    validate();
  }

  /// Filled image of the given shape.
  static BasicImage filled(Eigen::Index height, Eigen::Index width, int nchannels,
                           ColorSpace cs, Scalar value) {
    std::vector<Plane<Scalar>> planes(nchannels, Plane<Scalar>::Constant(height, width, value));
    return BasicImage(cs, std::move(planes));
  }

  Eigen::Index height() const { return channels.empty() ? 0 : channels.front().rows(); }
  Eigen::Index width() const { return channels.empty() ? 0 : channels.front().cols(); }
  int channel_count() const { return static_cast<int>(channels.size()); }

  /// Interleaved pixel value, (y, x, c).
  Scalar operator()(Eigen::Index y, Eigen::Index x, int c) const { return channels[c](y, x); }

  void validate() const {
    if (space == ColorSpace::Default)
      throw Error(Errc::InvalidInput, "an image cannot carry the 'default' color space");
    if (channels.size() != 1 && channels.size() != 3)
      throw Error(Errc::InvalidInput, "images have 1 or 3 channels");
    if (space == ColorSpace::Gray && channels.size() != 1)
      throw Error(Errc::InvalidInput, "gray images have exactly one channel");
    if (height() <= 0 || width() <= 0) throw Error(Errc::InvalidInput, "empty image");
    for (const auto& p : channels) {
      if (p.rows() != height() || p.cols() != width())
        throw Error(Errc::InvalidInput, "channel shapes differ");
    }
  }
};

using Image = BasicImage<double>;

/// Single-channel model output together with where it came from.
struct SaliencyMap {
  Plane<double> values;
  std::string model_name;
  ResolvedParams resolved_params;

  Eigen::Index height() const { return values.rows(); }
  Eigen::Index width() const { return values.cols(); }
};

}  // namespace salrun
