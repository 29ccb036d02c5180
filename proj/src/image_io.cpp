#include "salrun/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace salrun {

namespace fs = std::filesystem;

std::string_view to_string(ColorSpace cs) {
  switch (cs) {
    case ColorSpace::RGB: return "RGB";
    case ColorSpace::Gray: return "gray";
    case ColorSpace::YCbCr: return "YCbCr";
    case ColorSpace::LAB: return "LAB";
    case ColorSpace::HSV: return "HSV";
    case ColorSpace::Default: return "default";
  }
  return "?";
}

std::optional<ColorSpace> color_space_from_string(std::string_view s) {
  for (auto cs : {ColorSpace::RGB, ColorSpace::Gray, ColorSpace::YCbCr, ColorSpace::LAB,
                  ColorSpace::HSV, ColorSpace::Default}) {
    if (to_string(cs) == s) return cs;
  }
  return std::nullopt;
}

namespace {

constexpr std::array<unsigned char, 8> kPngMagic = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
constexpr std::array<unsigned char, 3> kJpegMagic = {0xff, 0xd8, 0xff};
constexpr std::array<char, 4> kF32Magic = {'S', 'A', 'L', 'F'};

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image from_interleaved(const std::vector<unsigned char>& px, std::size_t height, std::size_t width,
                       std::size_t stride_channels) {
  std::vector<Plane<double>> planes(3, Plane<double>(height, width));
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const unsigned char* p = &px[(y * width + x) * stride_channels];
      for (int c = 0; c < 3; ++c) planes[c](y, x) = p[c] / 255.0;
    }
  }
  return Image(ColorSpace::RGB, std::move(planes));
}

Image decode_png(const std::vector<unsigned char>& bytes, const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(Errc::DecodeError, path.string() + ": " + image.message);
  // RGBA then drop alpha: requesting RGB directly would composite onto black.
  image.format = PNG_FORMAT_RGBA;
  std::vector<unsigned char> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::DecodeError, path.string() + ": " + msg);
  }
  return from_interleaved(px, image.height, image.width, 4);
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Image decode_jpeg(const std::vector<unsigned char>& bytes, const fs::path& path) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<unsigned char> px;
  std::size_t height = 0, width = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(Errc::DecodeError, path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  height = cinfo.output_height;
  width = cinfo.output_width;
  px.resize(height * width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = &px[static_cast<std::size_t>(cinfo.output_scanline) * width * 3];
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_interleaved(px, height, width, 3);
}

template <std::size_t N>
bool starts_with(const std::vector<unsigned char>& bytes, const std::array<unsigned char, N>& magic) {
  return bytes.size() >= N && std::equal(magic.begin(), magic.end(), bytes.begin());
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void ensure_parent(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
}

void write_png(const fs::path& path, png_uint_32 format, std::size_t height, std::size_t width,
               const std::vector<unsigned char>& px) {
  ensure_parent(path);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, px.data(), 0, nullptr))
    throw Error(Errc::IoError, path.string() + ": " + image.message);
}

}  // namespace

Image load_image(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, path.string());
  const auto bytes = read_all(path);
  if (starts_with(bytes, kPngMagic)) return decode_png(bytes, path);
  if (starts_with(bytes, kJpegMagic)) return decode_jpeg(bytes, path);
  throw Error(Errc::UnsupportedFormat, path.string() + " is neither PNG nor JPEG");
}

void write_png_rgb(const Image& img, const fs::path& path) {
  if (img.channel_count() != 3) throw Error(Errc::InvalidInput, "write_png_rgb needs 3 channels");
  const auto h = static_cast<std::size_t>(img.height());
  const auto w = static_cast<std::size_t>(img.width());
  std::vector<unsigned char> px(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        px[(y * w + x) * 3 + c] = static_cast<unsigned char>(
            std::lround(std::clamp(img(y, x, c), 0.0, 1.0) * 255.0));
  write_png(path, PNG_FORMAT_RGB, h, w, px);
}

void write_f32raw(const Plane<double>& values, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(kF32Magic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(values.rows()));
  put_u32(out, static_cast<std::uint32_t>(values.cols()));
  put_u32(out, 0);
  for (Eigen::Index y = 0; y < values.rows(); ++y) {
    for (Eigen::Index x = 0; x < values.cols(); ++x) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values(y, x)));
      put_u32(out, bits);
    }
  }
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Plane<double> read_f32raw(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::MapFormatError, "missing map " + path.string());
  const auto bytes = read_all(path);
  if (bytes.size() < 16 || !std::equal(kF32Magic.begin(), kF32Magic.end(), bytes.begin()))
    throw Error(Errc::MapFormatError, path.string() + ": bad f32raw header");
  const std::uint64_t h = get_u32(&bytes[4]);
  const std::uint64_t w = get_u32(&bytes[8]);
  if (h == 0 || w == 0 || bytes.size() != 16 + h * w * 4)
    throw Error(Errc::MapFormatError, path.string() + ": payload size does not match header");
  Plane<double> out(h, w);
  for (std::uint64_t i = 0; i < h * w; ++i) {
    const float v = std::bit_cast<float>(get_u32(&bytes[16 + 4 * i]));
    out(i / w, i % w) = v;
  }
  return out;
}

void write_map(const SaliencyMap& map, const fs::path& path, MapFormat format) {
  if (format == MapFormat::F32Raw) {
    write_f32raw(map.values, path);
    return;
  }
  if (!map.values.allFinite() || map.values.minCoeff() < 0.0 || map.values.maxCoeff() > 1.0)
    throw Error(Errc::RangeError, "png8 output requires values in [0, 1] (" + path.string() + ")");
  const auto h = static_cast<std::size_t>(map.height());
  const auto w = static_cast<std::size_t>(map.width());
  std::vector<unsigned char> px(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      px[y * w + x] = static_cast<unsigned char>(std::lround(map.values(y, x) * 255.0));
  write_png(path, PNG_FORMAT_GRAY, h, w, px);
}

}  // namespace salrun
