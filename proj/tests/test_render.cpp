#include <cmath>

#include "doctest.h"
#include "occm/render.hpp"

using namespace occm;

namespace {

Mesh sphere_mesh(double radius) {
  AnalyticShape s;
  s.kind = ShapeKind::sphere;
  s.params = {radius, 0, 0};
  return marching_cubes(sample_grid([&](const Point3& p) { return analytic_sdf(s, p); }, 33));
}

bool all_black(const RasterImage& img) {
  for (std::uint8_t p : img.pixels)
    if (p != 0) return false;
  return true;
}

}  // namespace

TEST_CASE("empty mesh renders black") {
  CHECK(all_black(project_mesh(Mesh{}, Camera{}, Shading::silhouette)));
}

TEST_CASE("mesh behind the camera is culled") {
  Mesh m = sphere_mesh(0.4);
  m.translate({0, 0, 4.0});  // camera sits at z=2.5 looking toward -z
  CHECK(all_black(project_mesh(m, Camera{}, Shading::silhouette)));
}

TEST_CASE("sphere silhouette area matches the pinhole prediction") {
  const Camera cam;  // eye (0,0,2.5), fov 45, 64x64
  const BinaryMask mask = render_mask(sphere_mesh(0.5), cam);
  // Projected angular radius of a sphere: asin(r/d). On the image plane that
  // subtends tan(asin(r/d)) / tan(fov/2) half-widths.
  const double ang = std::asin(0.5 / 2.5);
  const double r_px = std::tan(ang) / std::tan(45.0 * M_PI / 360.0) * (64.0 / 2.0);
  const double expected = M_PI * r_px * r_px;
  const double actual = static_cast<double>(mask.count());
  CHECK(actual >= 0.9 * expected);
  CHECK(actual <= 1.1 * expected);
}

TEST_CASE("single triangle facing the camera covers the center pixel") {
  Mesh m;
  m.vertices = {{-0.5, -0.5, 0.0}, {0.5, -0.5, 0.0}, {0.0, 0.5, 0.0}};
  m.triangles = {{0, 1, 2}};
  const BinaryMask mask = render_mask(m, Camera{});
  CHECK(mask.at(32, 32));
}

TEST_CASE("mask equals thresholded silhouette image") {
  const Camera cam;
  const Mesh m = sphere_mesh(0.45);
  const RasterImage sil = project_mesh(m, cam, Shading::silhouette);
  const BinaryMask mask = render_mask(m, cam);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) CHECK(mask.at(x, y) == (sil.at(x, y)[0] > 0));
}

TEST_CASE("depth shading brightens nearer fragments") {
  const Camera cam;
  CHECK(depth_shade(cam, cam.near_plane) == 255);
  CHECK(depth_shade(cam, 2.0) > depth_shade(cam, 2.6));
  CHECK(depth_shade(cam, 100.0) == 0);
}

TEST_CASE("occlusion ratio identities") {
  BinaryMask full(20, 20), visible(20, 20);
  CHECK(occlusion_ratio(full, visible) == 0.0);  // empty full mask

  for (int i = 0; i < 100; ++i) full.set(i % 20, i / 20, true);
  CHECK(occlusion_ratio(full, full) == 0.0);
  CHECK(occlusion_ratio(full, BinaryMask(20, 20)) == 1.0);

  BinaryMask partial(20, 20);
  for (int i = 0; i < 75; ++i) partial.set(i % 20, i / 20, true);
  CHECK(occlusion_ratio(full, partial) == doctest::Approx(0.25));
}

TEST_CASE("camera validation rejects bad dimensions") {
  Camera cam;
  cam.width = 0;
  CHECK_THROWS_AS(cam.validate(), ConfigError);
  cam = Camera{};
  cam.fov_deg = 0;
  CHECK_THROWS_AS(cam.validate(), ConfigError);
}
