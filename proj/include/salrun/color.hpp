#pragma once

// Color-space conversions from and back to sRGB in [0, 1].
//
//   gray   Rec. 601 luma, one channel
//   YCbCr  full-range Rec. 601, all channels in [0, 1]
//   LAB    CIELAB via linear sRGB -> XYZ, D65 white
//   HSV    hue in degrees [0, 360), saturation and value in [0, 1]

#include <Eigen/Core>
#include <Eigen/LU>
#include <algorithm>
#include <array>
#include <cmath>

#include "salrun/image.hpp"

namespace salrun {
namespace color {

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> srgb_to_xyz() {
  Eigen::Matrix<Scalar, 3, 3> m;
  m << Scalar(0.4124564), Scalar(0.3575761), Scalar(0.1804375),
       Scalar(0.2126729), Scalar(0.7151522), Scalar(0.0721750),
       Scalar(0.0193339), Scalar(0.1191920), Scalar(0.9503041);
  return m;
}

// D65 white as the XYZ image of sRGB white, so white maps to a* = b* = 0 exactly.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> d65_white() {
  return srgb_to_xyz<Scalar>().rowwise().sum();
}

template <typename Scalar>
Scalar srgb_linearize(Scalar c) {
  return c <= Scalar(0.04045) ? c / Scalar(12.92)
                              : std::pow((c + Scalar(0.055)) / Scalar(1.055), Scalar(2.4));
}

template <typename Scalar>
Scalar srgb_delinearize(Scalar c) {
  return c <= Scalar(0.0031308) ? c * Scalar(12.92)
                                : Scalar(1.055) * std::pow(c, Scalar(1) / Scalar(2.4)) - Scalar(0.055);
}

template <typename Scalar>
Scalar lab_f(Scalar t) {
  constexpr double d = 6.0 / 29.0;
  return t > Scalar(d * d * d) ? std::cbrt(t) : t / Scalar(3 * d * d) + Scalar(4.0 / 29.0);
}

template <typename Scalar>
Scalar lab_f_inv(Scalar t) {
  constexpr double d = 6.0 / 29.0;
  return t > Scalar(d) ? t * t * t : Scalar(3 * d * d) * (t - Scalar(4.0 / 29.0));
}

template <typename Scalar>
std::array<Scalar, 3> rgb_to_lab(Scalar r, Scalar g, Scalar b) {
  const Eigen::Matrix<Scalar, 3, 1> lin(srgb_linearize(r), srgb_linearize(g), srgb_linearize(b));
  const Eigen::Matrix<Scalar, 3, 1> xyz =
      (srgb_to_xyz<Scalar>() * lin).cwiseQuotient(d65_white<Scalar>());
  const Scalar fx = lab_f(xyz(0)), fy = lab_f(xyz(1)), fz = lab_f(xyz(2));
  return {Scalar(116) * fy - Scalar(16), Scalar(500) * (fx - fy), Scalar(200) * (fy - fz)};
}

template <typename Scalar>
std::array<Scalar, 3> lab_to_rgb(Scalar l, Scalar a, Scalar bb) {
  const Scalar fy = (l + Scalar(16)) / Scalar(116);
  const Scalar fx = fy + a / Scalar(500);
  const Scalar fz = fy - bb / Scalar(200);
  const Eigen::Matrix<Scalar, 3, 1> xyz =
      Eigen::Matrix<Scalar, 3, 1>(lab_f_inv(fx), lab_f_inv(fy), lab_f_inv(fz))
          .cwiseProduct(d65_white<Scalar>());
  const Eigen::Matrix<Scalar, 3, 1> lin = srgb_to_xyz<Scalar>().inverse() * xyz;
  return {srgb_delinearize(lin(0)), srgb_delinearize(lin(1)), srgb_delinearize(lin(2))};
}

template <typename Scalar>
std::array<Scalar, 3> rgb_to_ycbcr(Scalar r, Scalar g, Scalar b) {
  const Scalar y = Scalar(kLumaR) * r + Scalar(kLumaG) * g + Scalar(kLumaB) * b;
  return {y, Scalar(0.5) + (b - y) * Scalar(0.5 / (1.0 - kLumaB)),
          Scalar(0.5) + (r - y) * Scalar(0.5 / (1.0 - kLumaR))};
}

template <typename Scalar>
std::array<Scalar, 3> ycbcr_to_rgb(Scalar y, Scalar cb, Scalar cr) {
  const Scalar r = y + (cr - Scalar(0.5)) * Scalar(2.0 * (1.0 - kLumaR));
  const Scalar b = y + (cb - Scalar(0.5)) * Scalar(2.0 * (1.0 - kLumaB));
  const Scalar g = (y - Scalar(kLumaR) * r - Scalar(kLumaB) * b) / Scalar(kLumaG);
  return {r, g, b};
}

template <typename Scalar>
std::array<Scalar, 3> rgb_to_hsv(Scalar r, Scalar g, Scalar b) {
  const Scalar hi = std::max({r, g, b});
  const Scalar lo = std::min({r, g, b});
  const Scalar delta = hi - lo;
  Scalar h = 0;
  if (delta > Scalar(0)) {
    if (hi == r) {
      h = Scalar(60) * std::fmod((g - b) / delta, Scalar(6));
    } else if (hi == g) {
      h = Scalar(60) * ((b - r) / delta + Scalar(2));
    } else {
      h = Scalar(60) * ((r - g) / delta + Scalar(4));
    }
    if (h < Scalar(0)) h += Scalar(360);
    if (h >= Scalar(360)) h -= Scalar(360);
  }
  const Scalar s = hi > Scalar(0) ? delta / hi : Scalar(0);
  return {h, s, hi};
}

template <typename Scalar>
std::array<Scalar, 3> hsv_to_rgb(Scalar h, Scalar s, Scalar v) {
  const Scalar c = v * s;
  const Scalar hp = h / Scalar(60);
  const Scalar x = c * (Scalar(1) - std::abs(std::fmod(hp, Scalar(2)) - Scalar(1)));
  const Scalar m = v - c;
  Scalar r = 0, g = 0, b = 0;
  switch (static_cast<int>(std::floor(hp)) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {r + m, g + m, b + m};
}

template <typename Scalar, typename Fn>
BasicImage<Scalar> map_pixels(const BasicImage<Scalar>& img, ColorSpace target, Fn&& fn) {
  std::vector<Plane<Scalar>> out(3, Plane<Scalar>(img.height(), img.width()));
  for (Eigen::Index y = 0; y < img.height(); ++y) {
    for (Eigen::Index x = 0; x < img.width(); ++x) {
      const auto px = fn(img(y, x, 0), img(y, x, 1), img(y, x, 2));
      for (int c = 0; c < 3; ++c) out[c](y, x) = px[c];
    }
  }
  return BasicImage<Scalar>(target, std::move(out));
}

}  // namespace color

/// Converts an RGB image into `target`. Converting to RGB returns a copy.
template <typename Scalar>
BasicImage<Scalar> convert_color(const BasicImage<Scalar>& img, ColorSpace target) {
  if (img.space != ColorSpace::RGB || img.channel_count() != 3)
    throw Error(Errc::InvalidInput, "convert_color expects a 3-channel RGB image");
  switch (target) {
    case ColorSpace::RGB:
      return img;
    case ColorSpace::Gray: {
      Plane<Scalar> luma = Scalar(color::kLumaR) * img.channels[0] +
                           Scalar(color::kLumaG) * img.channels[1] +
                           Scalar(color::kLumaB) * img.channels[2];
      return BasicImage<Scalar>(ColorSpace::Gray, {std::move(luma)});
    }
    case ColorSpace::YCbCr:
      return color::map_pixels(img, target, color::rgb_to_ycbcr<Scalar>);
    case ColorSpace::LAB:
      return color::map_pixels(img, target, color::rgb_to_lab<Scalar>);
    case ColorSpace::HSV:
      return color::map_pixels(img, target, color::rgb_to_hsv<Scalar>);
    case ColorSpace::Default:
      break;
  }
  throw Error(Errc::InvalidInput, "'default' must be resolved before color conversion");
}

/// Inverse of convert_color for the 3-channel spaces. Gray cannot be inverted.
template <typename Scalar>
BasicImage<Scalar> convert_to_rgb(const BasicImage<Scalar>& img) {
  switch (img.space) {
    case ColorSpace::RGB:
      return img;
    case ColorSpace::YCbCr:
      return color::map_pixels(img, ColorSpace::RGB, color::ycbcr_to_rgb<Scalar>);
    case ColorSpace::LAB:
      return color::map_pixels(img, ColorSpace::RGB, color::lab_to_rgb<Scalar>);
    case ColorSpace::HSV:
      return color::map_pixels(img, ColorSpace::RGB, color::hsv_to_rgb<Scalar>);
    default:
      break;
  }
  throw Error(Errc::InvalidInput, "no inverse conversion from " + std::string(to_string(img.space)));
}

}  // namespace salrun
