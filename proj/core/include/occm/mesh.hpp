#pragma once

#include <array>
#include <vector>

#include "occm/geometry.hpp"

namespace occm {

struct Mesh {
  std::vector<Point3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  void translate(const Point3& offset);
};

// Isosurface of the grid at level `iso` via the standard 256-case table with
// linear edge interpolation. Vertices on shared cell edges are welded, so
// closed surfaces come out watertight. Empty mesh when no sign change exists.
Mesh marching_cubes(const SdfGrid& grid, double iso = 0.0);

}  // namespace occm
