#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fuzzforge/dataset_io.hpp"
#include "fuzzforge/geometry.hpp"
#include "fuzzforge/raster.hpp"

namespace fuzzforge {

struct seed_record {
  std::uint64_t master_seed = 0;
  std::uint64_t frame_index = 0;
};

struct generated_frame {
  raster image;
  std::vector<bbox> boxes;
  seed_record seeds;
  method_tag method = method_tag::none;
  std::size_t skipped = 0;  // overlays or placements that produced no box

  annotation_record to_record(std::string image_name) const {
    annotation_record r{std::move(image_name), {image.width(), image.height()}, {}, data_origin::synthetic};
    for (const auto& b : boxes) r.objects.push_back({0, b});
    return r;
  }
};

/// Tight box, as pixel squares, of the set cells of a width x height mask.
inline std::optional<bbox> mask_box(const std::vector<std::uint8_t>& mask, int width, int height) {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (mask[static_cast<std::size_t>(y) * width + x]) {
        if (x < x0) x0 = x;
        if (x > x1) x1 = x;
        if (y < y0) y0 = y;
        if (y > y1) y1 = y;
      }
  if (x1 < 0) return std::nullopt;
  return bbox::from_corners(x0, y0, x1 + 1, y1 + 1);
}

}  // namespace fuzzforge
