#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "fuzzforge/error.hpp"

// Conventions: world and camera frames are right-handed with +Z forward,
// +X right and +Y down, so world "up" is -Y. Image origin is the top-left
// corner, u grows right and v grows down. Pixel (i, j) covers [i, i+1) x [j, j+1).

namespace fuzzforge {

struct vec2 {
  double x = 0, y = 0;
  friend bool operator==(const vec2&, const vec2&) = default;
};

struct vec3 {
  double x = 0, y = 0, z = 0;

  friend vec3 operator+(vec3 a, vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend vec3 operator-(vec3 a, vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend vec3 operator*(vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend vec3 operator*(double s, vec3 a) { return a * s; }
  friend bool operator==(const vec3&, const vec3&) = default;
};

inline double dot(vec3 a, vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline vec3 cross(vec3 a, vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(vec3 a) { return std::sqrt(dot(a, a)); }
inline vec3 normalized(vec3 a) {
  const double n = norm(a);
  if (!(n > 0)) throw error(errc::invalid_argument, "cannot normalize zero vector");
  return a * (1.0 / n);
}

inline constexpr vec3 world_up{0, -1, 0};
inline constexpr double near_plane = 1e-4;

/// Axis-aligned box in continuous pixel coordinates, stored as center + size.
class bbox {
 public:
  bbox(double cx, double cy, double w, double h) : cx_(cx), cy_(cy), w_(w), h_(h) {
    if (!(w > 0) || !(h > 0) || !std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) ||
        !std::isfinite(h))
      throw error(errc::invalid_argument, "bbox needs finite center and positive size");
  }

  static bbox from_corners(double x_min, double y_min, double x_max, double y_max) {
    return bbox((x_min + x_max) / 2, (y_min + y_max) / 2, x_max - x_min, y_max - y_min);
  }

  double cx() const noexcept { return cx_; }
  double cy() const noexcept { return cy_; }
  double w() const noexcept { return w_; }
  double h() const noexcept { return h_; }
  double x_min() const noexcept { return cx_ - w_ / 2; }
  double y_min() const noexcept { return cy_ - h_ / 2; }
  double x_max() const noexcept { return cx_ + w_ / 2; }
  double y_max() const noexcept { return cy_ + h_ / 2; }
  double area() const noexcept { return w_ * h_; }

  bool contains(const bbox& o) const noexcept {
    return o.x_min() >= x_min() && o.y_min() >= y_min() && o.x_max() <= x_max() &&
           o.y_max() <= y_max();
  }

  friend bool operator==(const bbox&, const bbox&) = default;

 private:
  double cx_, cy_, w_, h_;
};

/// Intersection of a box with [x0, x1] x [y0, y1]; absent when the overlap has no area.
inline std::optional<bbox> clip_box(double x_min, double y_min, double x_max, double y_max,
                                    double x0, double y0, double x1, double y1) {
  const double a = std::max(x_min, x0), b = std::max(y_min, y0);
  const double c = std::min(x_max, x1), d = std::min(y_max, y1);
  if (!(c > a) || !(d > b)) return std::nullopt;
  return bbox::from_corners(a, b, c, d);
}

inline double iou(const bbox& a, const bbox& b) {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

struct image_size {
  int width = 0;
  int height = 0;
  friend bool operator==(const image_size&, const image_size&) = default;
};

class camera_pose {
 public:
  camera_pose(vec3 position, double yaw, double pitch, double focal, vec2 principal_point,
              image_size size)
      : position_(position), yaw_(yaw), pitch_(pitch), focal_(focal), principal_(principal_point),
        size_(size) {
    if (!(focal > 0)) throw error(errc::invalid_argument, "focal length must be positive");
    if (size.width <= 0 || size.height <= 0)
      throw error(errc::invalid_argument, "image size must be positive");
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    forward_ = {sy * cp, -sp, cy * cp};
    right_ = {cy, 0, -sy};
    down_ = cross(forward_, right_);
  }

  /// Principal point at the image center, focal derived from the vertical field of view.
  static camera_pose from_fov(vec3 position, double yaw, double pitch, double fov_vertical,
                              image_size size) {
    if (!(fov_vertical > 0) || !(fov_vertical < M_PI))
      throw error(errc::invalid_argument, "vertical fov must be in (0, pi)");
    const double focal = (size.height / 2.0) / std::tan(fov_vertical / 2);
    return camera_pose(position, yaw, pitch, focal, {size.width / 2.0, size.height / 2.0}, size);
  }

  vec3 position() const noexcept { return position_; }
  double yaw() const noexcept { return yaw_; }
  double pitch() const noexcept { return pitch_; }
  double focal() const noexcept { return focal_; }
  vec2 principal_point() const noexcept { return principal_; }
  image_size size() const noexcept { return size_; }

  vec3 forward() const noexcept { return forward_; }
  vec3 right() const noexcept { return right_; }
  vec3 down() const noexcept { return down_; }

  vec3 to_camera(vec3 world) const {
    const vec3 d = world - position_;
    return {dot(d, right_), dot(d, down_), dot(d, forward_)};
  }

  /// Pinhole projection of a camera-frame point with positive depth.
  vec2 project_camera(vec3 cam) const {
    return {focal_ * cam.x / cam.z + principal_.x, focal_ * cam.y / cam.z + principal_.y};
  }

  /// World-space direction of the ray through image point (u, v), unnormalized.
  vec3 ray_direction(double u, double v) const {
    return forward_ + right_ * ((u - principal_.x) / focal_) + down_ * ((v - principal_.y) / focal_);
  }

 private:
  vec3 position_;
  double yaw_, pitch_, focal_;
  vec2 principal_;
  image_size size_;
  vec3 forward_, right_, down_;
};

struct fixed_orientation {
  vec3 normal;
};
struct face_camera {};

using billboard_orientation = std::variant<fixed_orientation, face_camera>;

class billboard {
 public:
  billboard(vec3 center, double width, double height, billboard_orientation orientation)
      : center_(center), width_(width), height_(height), orientation_(orientation) {
    if (!(width > 0) || !(height > 0))
      throw error(errc::invalid_argument, "billboard size must be positive");
    if (auto* f = std::get_if<fixed_orientation>(&orientation_)) {
      if (std::abs(norm(f->normal) - 1.0) > 1e-9)
        throw error(errc::invalid_argument, "billboard normal must be unit length");
    }
  }

  vec3 center() const noexcept { return center_; }
  double width() const noexcept { return width_; }
  double height() const noexcept { return height_; }
  const billboard_orientation& orientation() const noexcept { return orientation_; }

 private:
  vec3 center_;
  double width_, height_;
  billboard_orientation orientation_;
};

/// Placed quad in world space: corners are center +- width_axis*w/2 +- up_axis*h/2.
struct quad_frame {
  vec3 center;
  vec3 normal;
  vec3 width_axis;  // left to right across the texture
  vec3 up_axis;     // bottom to top of the texture
  double width;
  double height;

  /// Corners in texture order: top-left, top-right, bottom-right, bottom-left.
  std::array<vec3, 4> corners() const {
    const vec3 a = width_axis * (width / 2), b = up_axis * (height / 2);
    return {center - a + b, center + a + b, center + a - b, center - a - b};
  }

  /// World point at texture coordinate (s, t), s rightwards and t downwards in [0, 1].
  vec3 point_at(double s, double t) const {
    return center + width_axis * ((s - 0.5) * width) + up_axis * ((0.5 - t) * height);
  }
};

inline quad_frame resolve_quad(const camera_pose& camera, const billboard& plane) {
  vec3 n;
  if (auto* f = std::get_if<fixed_orientation>(&plane.orientation())) {
    n = f->normal;
  } else {
    const vec3 to_cam = camera.position() - plane.center();
    n = norm(to_cam) > 0 ? normalized(to_cam) : camera.forward() * -1.0;
  }
  vec3 a = cross(world_up, n);
  if (norm(a) < 1e-12) a = {1, 0, 0};
  a = normalized(a);
  const vec3 b = cross(n, a);
  return {plane.center(), n, a, b, plane.width(), plane.height()};
}

inline std::optional<vec2> project_point(const camera_pose& camera, vec3 p) {
  const vec3 c = camera.to_camera(p);
  if (c.z <= near_plane) return std::nullopt;
  return camera.project_camera(c);
}

/// Clip a camera-frame polygon to the half-space z >= near_plane.
inline std::vector<vec3> clip_near(const std::vector<vec3>& poly) {
  std::vector<vec3> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const vec3 cur = poly[i], nxt = poly[(i + 1) % n];
    const bool cin = cur.z >= near_plane, nin = nxt.z >= near_plane;
    if (cin) out.push_back(cur);
    if (cin != nin) {
      const double t = (near_plane - cur.z) / (nxt.z - cur.z);
      vec3 p = cur + (nxt - cur) * t;
      p.z = near_plane;
      out.push_back(p);
    }
  }
  return out;
}

struct rect {
  double x_min, y_min, x_max, y_max;
};

/// Bounding rectangle of the near-clipped quad projection before image clipping.
inline std::optional<rect> project_quad_extent(const camera_pose& camera, const quad_frame& quad) {
  std::vector<vec3> poly;
  for (const vec3& c : quad.corners()) poly.push_back(camera.to_camera(c));
  poly = clip_near(poly);
  if (poly.empty()) return std::nullopt;
  rect r{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const vec3& c : poly) {
    const vec2 uv = camera.project_camera(c);
    r.x_min = std::min(r.x_min, uv.x);
    r.y_min = std::min(r.y_min, uv.y);
    r.x_max = std::max(r.x_max, uv.x);
    r.y_max = std::max(r.y_max, uv.y);
  }
  return r;
}

inline std::optional<bbox> project_quad(const camera_pose& camera, const quad_frame& quad) {
  const auto r = project_quad_extent(camera, quad);
  if (!r) return std::nullopt;
  return clip_box(r->x_min, r->y_min, r->x_max, r->y_max, 0, 0, camera.size().width,
                  camera.size().height);
}

/// Visible image-space bounding box of a billboard, or absent when nothing is in view.
inline std::optional<bbox> project_billboard(const camera_pose& camera, const billboard& plane) {
  return project_quad(camera, resolve_quad(camera, plane));
}

/// All four corners in front of the near plane and inside the image rectangle.
inline bool fully_visible(const camera_pose& camera, const quad_frame& quad) {
  for (const vec3& c : quad.corners()) {
    const auto uv = project_point(camera, c);
    if (!uv || uv->x < 0 || uv->y < 0 || uv->x > camera.size().width ||
        uv->y > camera.size().height)
      return false;
  }
  return true;
}

}  // namespace fuzzforge
