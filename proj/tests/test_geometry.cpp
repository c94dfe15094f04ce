#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fuzzforge/geometry.hpp"
#include "oracles.hpp"

using namespace fuzzforge;

namespace {

camera_pose axis_camera() { return camera_pose({0, 0, 0}, 0, 0, 500, {500, 500}, {1000, 1000}); }

oracle::box corners(const bbox& b) { return {b.x_min(), b.y_min(), b.x_max(), b.y_max()}; }

}  // namespace

TEST(BBox, RejectsDegenerate) {
  EXPECT_THROW(bbox(0, 0, 0, 1), error);
  EXPECT_THROW(bbox(0, 0, 1, -1), error);
  EXPECT_THROW(bbox(NAN, 0, 1, 1), error);
}

TEST(BBox, CornerRoundTripOnDyadicGrid) {
  std::mt19937 gen(3);
  std::uniform_int_distribution<int> coord(0, 1 << 18);
  for (int i = 0; i < 2000; ++i) {
    double a = coord(gen) / 256.0, b = coord(gen) / 256.0, c = coord(gen) / 256.0, d = coord(gen) / 256.0;
    if (a == b || c == d) continue;
    const bbox box = bbox::from_corners(std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d));
    EXPECT_EQ(box.x_min(), std::min(a, b));
    EXPECT_EQ(box.x_max(), std::max(a, b));
    EXPECT_EQ(box.y_min(), std::min(c, d));
    EXPECT_EQ(box.y_max(), std::max(c, d));
    EXPECT_EQ(bbox::from_corners(box.x_min(), box.y_min(), box.x_max(), box.y_max()), box);
  }
}

TEST(Iou, Examples) {
  const bbox a(1, 1, 2, 2), b(2, 2, 2, 2);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(bbox(0, 0, 2, 2), bbox(10, 10, 2, 2)), 0.0);
  EXPECT_NEAR(iou(a, b), 1.0 / 7.0, 1e-15);
  // grid rasterization agrees on the worked case
  EXPECT_NEAR(oracle::grid_iou(corners(a), corners(b)), 1.0 / 7.0, 1e-12);
}

TEST(Iou, Properties) {
  std::mt19937 gen(11);
  std::uniform_int_distribution<int> pos(0, 40), size(1, 20);
  for (int i = 0; i < 500; ++i) {
    const bbox a(pos(gen), pos(gen), size(gen), size(gen));
    const bbox b(pos(gen), pos(gen), size(gen), size(gen));
    const double v = iou(a, b);
    EXPECT_DOUBLE_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, std::min(a.area(), b.area()) / std::max(a.area(), b.area()) + 1e-15);
    if (!(a == b)) {
      EXPECT_LT(v, 1.0);
    }
    EXPECT_NEAR(v, oracle::grid_iou(corners(a), corners(b), 2), 1e-12);
  }
}

TEST(ProjectPoint, Examples) {
  const auto cam = axis_camera();
  auto p = project_point(cam, {0, 0, 10});
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x, 500);
  EXPECT_DOUBLE_EQ(p->y, 500);
  p = project_point(cam, {1, 1, 10});
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x, 550);
  EXPECT_DOUBLE_EQ(p->y, 550);
  EXPECT_FALSE(project_point(cam, {0, 0, -5}));
  EXPECT_FALSE(project_point(cam, {0, 0, near_plane}));
}

TEST(ProjectPoint, YawTurnsTowardsPositiveX) {
  const camera_pose cam({0, 0, 0}, M_PI / 2, 0, 500, {500, 500}, {1000, 1000});
  const auto p = project_point(cam, {10, 0, 0});
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->x, 500, 1e-9);
  EXPECT_NEAR(p->y, 500, 1e-9);
}

TEST(Camera, FovToFocal) {
  const auto cam = camera_pose::from_fov({0, 0, 0}, 0, 0, M_PI / 2, {800, 600});
  EXPECT_NEAR(cam.focal(), 300.0, 1e-9);
  EXPECT_EQ(cam.principal_point().x, 400);
  EXPECT_EQ(cam.principal_point().y, 300);
}

TEST(ProjectBillboard, OnAxisClosedForm) {
  const auto box = project_billboard(axis_camera(), billboard({0, 0, 10}, 2, 2, face_camera{}));
  ASSERT_TRUE(box);
  EXPECT_NEAR(box->cx(), 500, 1e-6);
  EXPECT_NEAR(box->cy(), 500, 1e-6);
  EXPECT_NEAR(box->w(), 100, 1e-6);
  EXPECT_NEAR(box->h(), 100, 1e-6);
}

TEST(ProjectBillboard, BorderClip) {
  const auto box = project_billboard(axis_camera(), billboard({10, 0, 10}, 2, 2, fixed_orientation{{0, 0, -1}}));
  ASSERT_TRUE(box);
  EXPECT_NEAR(box->cx(), 975, 1e-9);
  EXPECT_NEAR(box->cy(), 500, 1e-9);
  EXPECT_NEAR(box->w(), 50, 1e-9);
  EXPECT_NEAR(box->h(), 100, 1e-9);
  const auto q = resolve_quad(axis_camera(), billboard({10, 0, 10}, 2, 2, fixed_orientation{{0, 0, -1}}));
  const auto dense = oracle::dense_projection(axis_camera(), q);
  ASSERT_TRUE(dense);
  EXPECT_NEAR(dense->x0, 950, 0.5);
  EXPECT_NEAR(dense->x1, 1000, 0.5);
}

TEST(ProjectBillboard, EdgeOnIsAbsent) {
  // plane containing the optical axis: normal perpendicular to it
  EXPECT_FALSE(project_billboard(axis_camera(), billboard({0, 0, 10}, 2, 2, fixed_orientation{{1, 0, 0}})));
}

TEST(ProjectBillboard, BehindCameraIsAbsent) {
  EXPECT_FALSE(project_billboard(axis_camera(), billboard({0, 0, -10}, 2, 2, face_camera{})));
}

TEST(ProjectBillboard, StraddlingNearPlaneExtendsToBorder) {
  // quad lying on the floor in front of and behind the camera
  const billboard floor({0, 1, 0}, 2, 20, fixed_orientation{{0, -1, 0}});
  const auto box = project_billboard(axis_camera(), floor);
  ASSERT_TRUE(box);
  EXPECT_NEAR(box->y_max(), 1000, 1e-9);
  EXPECT_GT(box->y_min(), 500);
}

TEST(Billboard, RejectsNonUnitNormal) {
  EXPECT_THROW(billboard({0, 0, 1}, 1, 1, fixed_orientation{{0, 0, 2}}), error);
  EXPECT_THROW(billboard({0, 0, 1}, 0, 1, face_camera{}), error);
}

TEST(ProjectBillboard, FullyInFrustumEqualsCornerRectangle) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> lateral(-2, 2), depth(6, 20), size(0.2, 2);
  const auto cam = axis_camera();
  for (int i = 0; i < 200; ++i) {
    const billboard plane({lateral(gen), lateral(gen), depth(gen)}, size(gen), size(gen), face_camera{});
    const auto q = resolve_quad(cam, plane);
    if (!fully_visible(cam, q)) continue;
    double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
    for (const auto& c : q.corners()) {
      const auto p = project_point(cam, c);
      x0 = std::min(x0, p->x);
      y0 = std::min(y0, p->y);
      x1 = std::max(x1, p->x);
      y1 = std::max(y1, p->y);
    }
    const auto box = project_billboard(cam, plane);
    ASSERT_TRUE(box);
    EXPECT_NEAR(box->x_min(), x0, 1e-9);
    EXPECT_NEAR(box->y_min(), y0, 1e-9);
    EXPECT_NEAR(box->x_max(), x1, 1e-9);
    EXPECT_NEAR(box->y_max(), y1, 1e-9);
  }
}

TEST(ProjectBillboard, ClippingMonotonicity) {
  std::mt19937 gen(9);
  std::uniform_real_distribution<double> pos(-6, 6), depth(-2, 15), size(0.3, 4), ang(-M_PI, M_PI);
  const auto cam = camera_pose::from_fov({0, 0, 0}, 0.3, 0.1, M_PI / 3, {640, 480});
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const vec3 n = normalized({std::cos(ang(gen)), 0.3 * pos(gen), std::sin(ang(gen))});
    const billboard plane({pos(gen), pos(gen) / 3, depth(gen)}, size(gen), size(gen), fixed_orientation{n});
    const auto q = resolve_quad(cam, plane);
    const auto raw = project_quad_extent(cam, q);
    const auto box = project_quad(cam, q);
    if (!box) continue;
    ASSERT_TRUE(raw);
    ++checked;
    EXPECT_GE(box->x_min(), std::max(raw->x_min, 0.0) - 1e-9);
    EXPECT_GE(box->y_min(), std::max(raw->y_min, 0.0) - 1e-9);
    EXPECT_LE(box->x_max(), std::min(raw->x_max, 640.0) + 1e-9);
    EXPECT_LE(box->y_max(), std::min(raw->y_max, 480.0) + 1e-9);
  }
  EXPECT_GT(checked, 100);
}

TEST(ClipNear, KeepsFrontPart) {
  const std::vector<vec3> poly = {{-1, 0, -1}, {1, 0, -1}, {1, 0, 1}, {-1, 0, 1}};
  const auto out = clip_near(poly);
  ASSERT_EQ(out.size(), 4u);
  for (const auto& p : out) EXPECT_GE(p.z, near_plane);
}
