#include <cmath>
#include <cstdint>
#include <map>

#include "doctest.h"
#include "occm/mesh.hpp"

using namespace occm;

namespace {

// Watertight: every undirected edge is shared by exactly two triangles.
bool watertight(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  for (const auto& [edge, count] : edges)
    if (count != 2) return false;
  return !edges.empty();
}

SdfGrid sphere_grid(double radius, int res) {
  AnalyticShape s;
  s.kind = ShapeKind::sphere;
  s.params = {radius, 0, 0};
  return sample_grid([&](const Point3& p) { return analytic_sdf(s, p); }, res);
}

}  // namespace

TEST_CASE("all-positive and all-negative grids produce empty meshes") {
  SdfGrid g;
  g.res = 5;
  g.values.assign(125, 1.0);
  CHECK(marching_cubes(g).empty());
  g.values.assign(125, -1.0);
  CHECK(marching_cubes(g).empty());
}

TEST_CASE("sphere isosurface is watertight with bounded radial error") {
  const Mesh mesh = marching_cubes(sphere_grid(0.5, 33));
  REQUIRE(!mesh.empty());
  CHECK(watertight(mesh));
  const double bound = 2.0 * std::sqrt(3.0) / 32.0;  // one cell diagonal
  for (const Point3& v : mesh.vertices) CHECK(std::abs(v.norm() - 0.5) <= bound);
}

TEST_CASE("box and cylinder isosurfaces are watertight") {
  AnalyticShape box;
  box.kind = ShapeKind::box;
  box.params = {0.3, 0.25, 0.4};
  box.rotation = Mat3::rotation_z(0.4);
  CHECK(watertight(marching_cubes(
      sample_grid([&](const Point3& p) { return analytic_sdf(box, p); }, 33))));

  AnalyticShape cyl;
  cyl.kind = ShapeKind::cylinder;
  cyl.params = {0.3, 0.45, 0.0};
  cyl.rotation = Mat3::rotation_x(0.6);
  CHECK(watertight(marching_cubes(
      sample_grid([&](const Point3& p) { return analytic_sdf(cyl, p); }, 33))));
}

TEST_CASE("nonzero iso level shifts the extracted radius") {
  const Mesh mesh = marching_cubes(sphere_grid(0.5, 33), 0.2);
  REQUIRE(!mesh.empty());
  const double bound = 2.0 * std::sqrt(3.0) / 32.0;
  for (const Point3& v : mesh.vertices) CHECK(std::abs(v.norm() - 0.7) <= bound);
}

TEST_CASE("mesh translation shifts every vertex") {
  Mesh mesh = marching_cubes(sphere_grid(0.4, 17));
  const Point3 before = mesh.vertices.at(0);
  mesh.translate({0.1, -0.2, 0.3});
  CHECK(mesh.vertices[0].x == doctest::Approx(before.x + 0.1));
  CHECK(mesh.vertices[0].y == doctest::Approx(before.y - 0.2));
  CHECK(mesh.vertices[0].z == doctest::Approx(before.z + 0.3));
}
