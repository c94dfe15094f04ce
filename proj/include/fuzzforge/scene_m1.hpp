#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fuzzforge/error.hpp"
#include "fuzzforge/frame.hpp"
#include "fuzzforge/geometry.hpp"
#include "fuzzforge/raster.hpp"
#include "fuzzforge/rng.hpp"
#include "fuzzforge/sprites.hpp"

namespace fuzzforge {

struct aabb {
  vec3 min;
  vec3 max;

  bool valid() const { return min.x <= max.x && min.y <= max.y && min.z <= max.z; }
  vec3 sample(rng_stream& rng) const {
    const double x = rng.uniform(min.x, max.x);
    const double y = rng.uniform(min.y, max.y);
    const double z = rng.uniform(min.z, max.z);
    return {x, y, z};
  }
};

struct interval {
  double lo = 0;
  double hi = 0;
};

struct int_interval {
  int lo = 0;
  int hi = 0;
};

struct scene_config {
  aabb camera_region{{0, 0, 0}, {0, 0, 0}};
  interval yaw_range{0, 0};
  bool pitch_fixed = true;
  double pitch_value = 0;          // horizontal view by default
  interval pitch_range{0, 0};      // used when the pitch is free and nothing is tracked
  std::vector<vec3> track_targets;
  double fov_vertical = M_PI / 3;
  image_size size{640, 480};
  aabb placement_region{{-2, -1, 6}, {2, 1, 10}};
  int_interval flame_count_range{1, 3};
  interval flame_size_range{0.5, 3.0};
  billboard_orientation orientation = fixed_orientation{{0, 0, -1}};
  std::string background_ref;

  void validate() const {
    if (!camera_region.valid() || !placement_region.valid())
      throw error(errc::invalid_argument, "camera and placement regions need min <= max");
    if (flame_count_range.lo < 1 || flame_count_range.hi < flame_count_range.lo)
      throw error(errc::invalid_argument, "flame count range must satisfy 1 <= lo <= hi");
    if (!(flame_size_range.lo > 0) || flame_size_range.hi < flame_size_range.lo)
      throw error(errc::invalid_argument, "flame size range must satisfy 0 < lo <= hi");
    if (yaw_range.hi < yaw_range.lo || pitch_range.hi < pitch_range.lo)
      throw error(errc::invalid_argument, "angle ranges must satisfy lo <= hi");
    if (size.width <= 0 || size.height <= 0)
      throw error(errc::invalid_argument, "image size must be positive");
  }
};

/// Yaw that turns the forward axis toward `target` (rotation about world up).
inline double yaw_towards(vec3 from, vec3 target) {
  const vec3 d = target - from;
  return std::atan2(d.x, d.z);
}

/// Pitch that raises the forward axis toward `target`; positive looks up.
inline double pitch_towards(vec3 from, vec3 target) {
  const vec3 d = target - from;
  return std::atan2(-d.y, std::hypot(d.x, d.z));
}

inline camera_pose sample_camera(const scene_config& config, rng_stream& rng) {
  config.validate();
  const vec3 pos = config.camera_region.sample(rng);
  double yaw, pitch;
  if (!config.track_targets.empty()) {
    const vec3* nearest = &config.track_targets.front();
    for (const auto& t : config.track_targets)
      if (norm(t - pos) < norm(*nearest - pos)) nearest = &t;
    yaw = yaw_towards(pos, *nearest);
    pitch = config.pitch_fixed ? config.pitch_value : pitch_towards(pos, *nearest);
  } else {
    yaw = rng.uniform(config.yaw_range.lo, config.yaw_range.hi);
    pitch = config.pitch_fixed ? config.pitch_value
                               : rng.uniform(config.pitch_range.lo, config.pitch_range.hi);
  }
  return camera_pose::from_fov(pos, yaw, pitch, config.fov_vertical, config.size);
}

struct placement {
  billboard plane;
  std::size_t sprite_index;
};

inline std::vector<placement> place_billboards(const scene_config& config, const sprite_catalog& sprites,
                                               rng_stream& rng) {
  config.validate();
  if (sprites.empty()) throw error(errc::empty_catalog, "no sprites to place");
  const auto k = rng.uniform_int(config.flame_count_range.lo, config.flame_count_range.hi);
  std::vector<placement> out;
  for (std::int64_t i = 0; i < k; ++i) {
    const std::size_t idx = rng.index(sprites.size());
    const vec3 center = config.placement_region.sample(rng);
    const double height = rng.uniform(config.flame_size_range.lo, config.flame_size_range.hi);
    const auto& s = sprites.sprites[idx];
    const double width = height * s.width() / s.height();
    out.push_back({billboard(center, width, height, config.orientation), idx});
  }
  return out;
}

enum class texture_filter { nearest, bilinear };

struct m1_options {
  texture_filter filter = texture_filter::nearest;
  std::uint8_t alpha_annot_threshold = 0;
};

/// What happened to one placement during rendering.
struct billboard_trace {
  std::optional<bbox> box;        // clipped corner projection, the emitted annotation
  std::optional<bbox> alpha_box;  // tight box of this billboard's own painted pixels
  bool fully_visible = false;
  double depth = 0;
};

namespace detail {

inline rgba sample_texture(const raster& tex, double s, double t, texture_filter filter) {
  if (filter == texture_filter::nearest) {
    const int i = std::min(tex.width() - 1, static_cast<int>(s * tex.width()));
    const int j = std::min(tex.height() - 1, static_cast<int>(t * tex.height()));
    return tex.at(i, j);
  }
  const double x = s * tex.width() - 0.5, y = t * tex.height() - 0.5;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto px = [&](int i, int j) {
    return tex.at(std::clamp(i, 0, tex.width() - 1), std::clamp(j, 0, tex.height() - 1));
  };
  const rgba p00 = px(x0, y0), p10 = px(x0 + 1, y0), p01 = px(x0, y0 + 1), p11 = px(x0 + 1, y0 + 1);
  auto mix = [&](std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    const double v = (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
    return static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
  };
  return {mix(p00.r, p10.r, p01.r, p11.r), mix(p00.g, p10.g, p01.g, p11.g),
          mix(p00.b, p10.b, p01.b, p11.b), mix(p00.a, p10.a, p01.a, p11.a)};
}

}  // namespace detail

/// Texture-maps each visible billboard onto the background back-to-front and
/// annotates it with the clipped projection of its corners. A pixel is painted
/// when the ray through its center hits the quad.
inline generated_frame render_m1(const camera_pose& camera, const std::vector<placement>& placements,
                                 const sprite_catalog& sprites, const raster& background,
                                 const m1_options& options = {},
                                 std::vector<billboard_trace>* trace = nullptr) {
  const image_size sz = camera.size();
  if (background.width() != sz.width || background.height() != sz.height)
    throw error(errc::dimension_mismatch, "background size differs from camera image size");

  generated_frame frame;
  frame.image = background;
  frame.method = method_tag::m1;

  std::vector<quad_frame> quads;
  std::vector<billboard_trace> traces(placements.size());
  for (std::size_t i = 0; i < placements.size(); ++i) {
    if (placements[i].sprite_index >= sprites.size())
      throw error(errc::invalid_argument, "placement references a missing sprite");
    quads.push_back(resolve_quad(camera, placements[i].plane));
    traces[i].box = project_quad(camera, quads[i]);
    traces[i].fully_visible = fully_visible(camera, quads[i]);
    traces[i].depth = camera.to_camera(quads[i].center).z;
  }

  std::vector<std::size_t> order(placements.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return traces[a].depth > traces[b].depth; });

  const vec3 origin = camera.position();
  std::vector<std::uint8_t> mask;
  for (std::size_t idx : order) {
    auto& tr = traces[idx];
    if (!tr.box) continue;
    const quad_frame& q = quads[idx];
    const raster& tex = sprites.sprites[placements[idx].sprite_index].pixels;
    const int x_begin = std::max(0, static_cast<int>(std::ceil(tr.box->x_min() - 0.5)));
    const int x_end = std::min(sz.width - 1, static_cast<int>(std::floor(tr.box->x_max() - 0.5)));
    const int y_begin = std::max(0, static_cast<int>(std::ceil(tr.box->y_min() - 0.5)));
    const int y_end = std::min(sz.height - 1, static_cast<int>(std::floor(tr.box->y_max() - 0.5)));
    mask.assign(static_cast<std::size_t>(sz.width) * sz.height, 0);
    for (int y = y_begin; y <= y_end; ++y) {
      for (int x = x_begin; x <= x_end; ++x) {
        const vec3 dir = camera.ray_direction(x + 0.5, y + 0.5);
        const double denom = dot(q.normal, dir);
        if (std::abs(denom) < 1e-15) continue;
        const double t = dot(q.normal, q.center - origin) / denom;
        if (!(t > near_plane)) continue;  // forward component of dir is 1, so t is depth
        const vec3 rel = origin + dir * t - q.center;
        const double s = dot(rel, q.width_axis) / q.width + 0.5;
        const double v = 0.5 - dot(rel, q.up_axis) / q.height;
        if (s < 0 || s >= 1 || v < 0 || v >= 1) continue;
        const rgba texel = detail::sample_texture(tex, s, v, options.filter);
        if (texel.a > options.alpha_annot_threshold) mask[static_cast<std::size_t>(y) * sz.width + x] = 1;
        frame.image.at(x, y) = blend_over(frame.image.at(x, y), texel);
      }
    }
    tr.alpha_box = mask_box(mask, sz.width, sz.height);
  }

  for (const auto& tr : traces) {
    if (tr.box)
      frame.boxes.push_back(*tr.box);
    else
      ++frame.skipped;
  }
  if (trace) *trace = std::move(traces);
  return frame;
}

}  // namespace fuzzforge
