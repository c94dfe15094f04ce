#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fuzzforge/error.hpp"

namespace fuzzforge {

struct rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 0;
  friend bool operator==(const rgba&, const rgba&) = default;
};

/// 8-bit straight-alpha RGBA image, row-major, origin top-left.
class raster {
 public:
  raster() = default;
  raster(int width, int height, rgba fill = {}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw error(errc::invalid_argument, "negative raster size");
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  rgba& at(int x, int y) { return pixels_[index(x, y)]; }
  const rgba& at(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<rgba> pixels() noexcept { return pixels_; }
  std::span<const rgba> pixels() const noexcept { return pixels_; }

  /// Copy of the sub-rectangle [x, x+w) x [y, y+h); must lie inside the raster.
  raster crop(int x, int y, int w, int h) const {
    if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > width_ || y + h > height_)
      throw error(errc::invalid_argument, "crop rectangle outside raster");
    raster out(w, h);
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) out.at(i, j) = at(x + i, y + j);
    return out;
  }

  friend bool operator==(const raster&, const raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<rgba> pixels_;
};

/// Straight-alpha "over" operator for a single pixel.
inline rgba blend_over(rgba dst, rgba src) {
  if (src.a == 0) return dst;
  if (src.a == 255) return src;
  const double as = src.a / 255.0;
  const double ad = dst.a / 255.0;
  const double ao = as + ad * (1.0 - as);
  auto channel = [&](std::uint8_t cs, std::uint8_t cd) {
    const double v = (cs * as + cd * ad * (1.0 - as)) / ao;
    return static_cast<std::uint8_t>(v + 0.5);
  };
  return {channel(src.r, dst.r), channel(src.g, dst.g), channel(src.b, dst.b),
          static_cast<std::uint8_t>(ao * 255.0 + 0.5)};
}

inline raster read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw error(errc::io_error, path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGBA;
  raster out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.pixels().data(), 0, nullptr)) {
    png_image_free(&image);
    throw error(errc::io_error, path.string() + ": " + image.message);
  }
  return out;
}

inline void write_png(const raster& img, const std::filesystem::path& path) {
  if (img.empty()) throw error(errc::invalid_argument, "cannot write empty raster");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels().data(), 0, nullptr))
    throw error(errc::io_error, path.string() + ": " + image.message);
}

}  // namespace fuzzforge
