#pragma once

// Reference computations used only by the tests. They follow the definitions
// directly and share no code path with the routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "fuzzforge/geometry.hpp"
#include "fuzzforge/sprites.hpp"

namespace oracle {

using fuzzforge::vec3;

struct box {
  double x0, y0, x1, y1;
};

/// World to camera through the explicit rotation matrix R = Ry(yaw) * Rx(pitch).
inline vec3 world_to_camera(const fuzzforge::camera_pose& cam, vec3 p) {
  const double cy = std::cos(cam.yaw()), sy = std::sin(cam.yaw());
  const double cp = std::cos(cam.pitch()), sp = std::sin(cam.pitch());
  const double ry[3][3] = {{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}};
  const double rx[3][3] = {{1, 0, 0}, {0, cp, -sp}, {0, sp, cp}};
  double r[3][3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += ry[i][k] * rx[k][j];
  const double d[3] = {p.x - cam.position().x, p.y - cam.position().y, p.z - cam.position().z};
  double c[3] = {};
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) c[j] += r[i][j] * d[i];  // R^T d
  return {c[0], c[1], c[2]};
}

/// Bounding rectangle of a grid x grid lattice of quad surface points (edges and
/// corners included), skipping points behind the near plane, clipped to the image.
inline std::optional<box> dense_projection(const fuzzforge::camera_pose& cam, const fuzzforge::quad_frame& q,
                                           int grid = 100) {
  box b{INFINITY, INFINITY, -INFINITY, -INFINITY};
  bool any = false;
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) {
      const double s = static_cast<double>(i) / (grid - 1), t = static_cast<double>(j) / (grid - 1);
      const vec3 p = q.center + q.width_axis * ((s - 0.5) * q.width) + q.up_axis * ((0.5 - t) * q.height);
      const vec3 c = world_to_camera(cam, p);
      if (c.z <= fuzzforge::near_plane) continue;
      const double u = cam.focal() * c.x / c.z + cam.principal_point().x;
      const double v = cam.focal() * c.y / c.z + cam.principal_point().y;
      b = {std::min(b.x0, u), std::min(b.y0, v), std::max(b.x1, u), std::max(b.y1, v)};
      any = true;
    }
  if (!any) return std::nullopt;
  b = {std::max(b.x0, 0.0), std::max(b.y0, 0.0), std::min(b.x1, double(cam.size().width)),
       std::min(b.y1, double(cam.size().height))};
  if (!(b.x1 > b.x0) || !(b.y1 > b.y0)) return std::nullopt;
  return b;
}

/// IoU by counting cells of a 1/res pixel grid covered by each box.
inline double grid_iou(const box& a, const box& b, int res = 8) {
  const double lo_x = std::min(a.x0, b.x0), lo_y = std::min(a.y0, b.y0);
  const double hi_x = std::max(a.x1, b.x1), hi_y = std::max(a.y1, b.y1);
  long long inter = 0, uni = 0;
  for (double y = lo_y + 0.5 / res; y < hi_y; y += 1.0 / res)
    for (double x = lo_x + 0.5 / res; x < hi_x; x += 1.0 / res) {
      const bool in_a = x > a.x0 && x < a.x1 && y > a.y0 && y < a.y1;
      const bool in_b = x > b.x0 && x < b.x1 && y > b.y0 && y < b.y1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

/// 101-point interpolated AP straight from cumulative TP/FP counts of a
/// confidence-ordered hit sequence. Recall thresholds are compared in integers.
inline double brute_force_ap(const std::vector<bool>& hits, int total_truths) {
  if (total_truths == 0) return 0.0;
  std::vector<int> tp(hits.size());
  int running = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) tp[i] = running += hits[i] ? 1 : 0;
  double sum = 0;
  for (int k = 0; k <= 100; ++k) {
    double best = 0;
    for (std::size_t i = 0; i < hits.size(); ++i)
      if (tp[i] * 100 >= k * total_truths)
        best = std::max(best, static_cast<double>(tp[i]) / static_cast<double>(i + 1));
    sum += best;
  }
  return sum / 101.0;
}

/// Pixels of an image that a nearest-neighbour scaled sprite placed at
/// (left, top) covers with alpha above threshold; tight box as pixel squares.
inline std::optional<box> alpha_scan(int image_w, int image_h, const fuzzforge::sprite& s, int left, int top,
                                     double scale, std::uint8_t threshold = 0) {
  const int tw = std::max(1, static_cast<int>(std::lround(s.width() * scale)));
  const int th = std::max(1, static_cast<int>(std::lround(s.height() * scale)));
  box b{INFINITY, INFINITY, -INFINITY, -INFINITY};
  bool any = false;
  for (int y = 0; y < image_h; ++y)
    for (int x = 0; x < image_w; ++x) {
      const int i = x - left, j = y - top;
      if (i < 0 || j < 0 || i >= tw || j >= th) continue;
      const int si = static_cast<int>(std::floor((i + 0.5) * s.width() / tw));
      const int sj = static_cast<int>(std::floor((j + 0.5) * s.height() / th));
      if (s.pixels.at(si, sj).a <= threshold) continue;
      b = {std::min(b.x0, double(x)), std::min(b.y0, double(y)), std::max(b.x1, x + 1.0), std::max(b.y1, y + 1.0)};
      any = true;
    }
  if (!any) return std::nullopt;
  return b;
}

}  // namespace oracle
