#pragma once

#include <filesystem>

#include "salrun/image.hpp"

namespace salrun {

enum class MapFormat { Png8, F32Raw };

/// Decodes a PNG or JPEG file into an RGB image with samples scaled to [0, 1].
/// Gray sources are expanded to three equal channels; alpha is dropped.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit sRGB PNG of an RGB image (values clamped to [0, 1]).
void write_png_rgb(const Image& img, const std::filesystem::path& path);

/// png8: 8-bit gray PNG, v -> round(v * 255), values must lie in [0, 1].
/// f32raw: "SALF", u32 height, u32 width, u32 0, then float32 samples, all little-endian.
void write_map(const SaliencyMap& map, const std::filesystem::path& path, MapFormat format);

void write_f32raw(const Plane<double>& values, const std::filesystem::path& path);
Plane<double> read_f32raw(const std::filesystem::path& path);

}  // namespace salrun
