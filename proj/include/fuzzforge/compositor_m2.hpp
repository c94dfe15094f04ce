#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "fuzzforge/error.hpp"
#include "fuzzforge/frame.hpp"
#include "fuzzforge/raster.hpp"
#include "fuzzforge/rng.hpp"
#include "fuzzforge/scene_m1.hpp"
#include "fuzzforge/sprites.hpp"

namespace fuzzforge {

struct overlay_spec {
  std::size_t sprite_index = 0;
  int left = 0;  // top-left corner, may be negative
  int top = 0;
  double scale = 1.0;
  double min_visible_fraction = 0.25;
};

inline image_size scaled_size(const sprite& s, double scale) {
  if (!(scale > 0)) throw error(errc::invalid_argument, "overlay scale must be positive");
  return {std::max(1, static_cast<int>(std::lround(s.width() * scale))),
          std::max(1, static_cast<int>(std::lround(s.height() * scale)))};
}

/// Nearest-neighbour source texel for destination cell `i` of `dst` cells over `src` texels.
inline int nearest_source(int i, int dst, int src) {
  return static_cast<int>((2LL * i + 1) * src / (2LL * dst));
}

/// Fraction of the scaled sprite rectangle that lies inside the image.
inline double visible_fraction(int left, int top, image_size scaled, image_size image) {
  const long long w = std::max(0, std::min(left + scaled.width, image.width) - std::max(left, 0));
  const long long h = std::max(0, std::min(top + scaled.height, image.height) - std::max(top, 0));
  return static_cast<double>(w * h) / (static_cast<double>(scaled.width) * scaled.height);
}

struct m2_options {
  std::uint8_t alpha_annot_threshold = 0;
};

/// Per-overlay outcome: the pixels it contributed with alpha above threshold and their box.
struct overlay_contribution {
  std::vector<std::uint8_t> mask;
  std::optional<bbox> box;
};

/// Composites sprites over the background in listed order. Each box is the tight
/// box of that overlay's own above-threshold pixels inside the image; overlays
/// with no such pixel are skipped and counted.
inline generated_frame compose(const raster& background, const std::vector<overlay_spec>& overlays,
                               const sprite_catalog& sprites, const m2_options& options = {},
                               std::vector<overlay_contribution>* contributions = nullptr) {
  if (background.empty()) throw error(errc::invalid_argument, "background is empty");
  const int W = background.width(), H = background.height();
  generated_frame frame;
  frame.image = background;
  frame.method = method_tag::m2;
  if (contributions) contributions->clear();

  for (const auto& ov : overlays) {
    if (ov.sprite_index >= sprites.size())
      throw error(errc::invalid_argument, "overlay references a missing sprite");
    const sprite& s = sprites.sprites[ov.sprite_index];
    const image_size scaled = scaled_size(s, ov.scale);
    overlay_contribution contrib;
    contrib.mask.assign(static_cast<std::size_t>(W) * H, 0);
    const int x_begin = std::max(0, ov.left), x_end = std::min(W, ov.left + scaled.width);
    const int y_begin = std::max(0, ov.top), y_end = std::min(H, ov.top + scaled.height);
    for (int y = y_begin; y < y_end; ++y) {
      const int sy = nearest_source(y - ov.top, scaled.height, s.height());
      for (int x = x_begin; x < x_end; ++x) {
        const rgba texel = s.pixels.at(nearest_source(x - ov.left, scaled.width, s.width()), sy);
        if (texel.a > options.alpha_annot_threshold) contrib.mask[static_cast<std::size_t>(y) * W + x] = 1;
        frame.image.at(x, y) = blend_over(frame.image.at(x, y), texel);
      }
    }
    contrib.box = mask_box(contrib.mask, W, H);
    if (contrib.box)
      frame.boxes.push_back(*contrib.box);
    else
      ++frame.skipped;
    if (contributions) contributions->push_back(std::move(contrib));
  }
  return frame;
}

struct randomizer_params {
  int_interval count{1, 3};
  interval height_fraction{0.05, 0.40};  // target sprite height as a fraction of image height
  double min_visible_fraction = 0.25;
  int max_retries = 100;
};

inline std::vector<overlay_spec> randomize_overlays(image_size size, const sprite_catalog& sprites,
                                                    const randomizer_params& params, rng_stream& rng) {
  if (sprites.empty()) throw error(errc::empty_catalog, "no sprites to overlay");
  if (size.width <= 0 || size.height <= 0) throw error(errc::invalid_argument, "image size must be positive");
  if (params.count.lo < 0 || params.count.hi < params.count.lo)
    throw error(errc::invalid_argument, "overlay count range must satisfy 0 <= lo <= hi");
  if (!(params.height_fraction.lo > 0) || params.height_fraction.hi < params.height_fraction.lo)
    throw error(errc::invalid_argument, "height fraction range must satisfy 0 < lo <= hi");
  if (!(params.min_visible_fraction > 0) || params.min_visible_fraction > 1)
    throw error(errc::invalid_argument, "min visible fraction must be in (0, 1]");

  const auto k = rng.uniform_int(params.count.lo, params.count.hi);
  std::vector<overlay_spec> out;
  for (std::int64_t n = 0; n < k; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_retries && !placed; ++attempt) {
      overlay_spec spec;
      spec.sprite_index = rng.index(sprites.size());
      spec.min_visible_fraction = params.min_visible_fraction;
      const sprite& s = sprites.sprites[spec.sprite_index];
      const double target_h = rng.uniform(params.height_fraction.lo, params.height_fraction.hi) * size.height;
      spec.scale = target_h / s.height();
      const image_size scaled = scaled_size(s, spec.scale);
      spec.left = static_cast<int>(rng.uniform_int(1 - scaled.width, size.width - 1));
      spec.top = static_cast<int>(rng.uniform_int(1 - scaled.height, size.height - 1));
      if (visible_fraction(spec.left, spec.top, scaled, size) >= spec.min_visible_fraction) {
        out.push_back(spec);
        placed = true;
      }
    }
    if (!placed)
      throw error(errc::placement_exhausted,
                  "no placement met the visibility constraint after " + std::to_string(params.max_retries) +
                      " attempts");
  }
  return out;
}

/// Vertical two-colour gradient with smooth value noise on top; fully opaque.
inline raster procedural_background(image_size size, rng_stream& rng) {
  if (size.width <= 0 || size.height <= 0) throw error(errc::invalid_argument, "image size must be positive");
  double top[3], bottom[3];
  for (auto& c : top) c = rng.uniform(0, 255);
  for (auto& c : bottom) c = rng.uniform(0, 255);
  constexpr int cell = 16;
  const int gw = size.width / cell + 2, gh = size.height / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = rng.uniform(-40, 40);
  auto smooth = [](double t) { return t * t * (3 - 2 * t); };

  raster out(size.width, size.height);
  for (int y = 0; y < size.height; ++y) {
    const double gy = (y + 0.5) / cell;
    const int j = static_cast<int>(gy);
    const double fy = smooth(gy - j);
    const double mix = size.height > 1 ? static_cast<double>(y) / (size.height - 1) : 0.0;
    for (int x = 0; x < size.width; ++x) {
      const double gx = (x + 0.5) / cell;
      const int i = static_cast<int>(gx);
      const double fx = smooth(gx - i);
      auto L = [&](int a, int b) { return lattice[static_cast<std::size_t>(b) * gw + a]; };
      const double noise = (L(i, j) * (1 - fx) + L(i + 1, j) * fx) * (1 - fy) +
                           (L(i, j + 1) * (1 - fx) + L(i + 1, j + 1) * fx) * fy;
      std::uint8_t ch[3];
      for (int c = 0; c < 3; ++c)
        ch[c] = static_cast<std::uint8_t>(std::clamp(top[c] * (1 - mix) + bottom[c] * mix + noise, 0.0, 255.0) + 0.5);
      out.at(x, y) = {ch[0], ch[1], ch[2], 255};
    }
  }
  return out;
}

}  // namespace fuzzforge
