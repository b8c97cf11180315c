#include "occm/mesh.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace occm {

#include "marching_cubes_tables.inc"

namespace {

// Corner offsets in (di, dj, dk); edge e connects kEdgeCorners[e][0..1].
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                     {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

void Mesh::translate(const Point3& offset) {
  for (Point3& v : vertices) v = v + offset;
}

Mesh marching_cubes(const SdfGrid& grid, double iso) {
  if (grid.res < 2) throw InvalidInputError("marching_cubes: grid resolution must be >= 2");
  for (double v : grid.values)
    if (!std::isfinite(v)) throw InvalidInputError("marching_cubes: non-finite grid value");

  Mesh mesh;
  const int n = grid.res;
  auto corner_index = [n](int i, int j, int k) -> std::uint64_t {
    return static_cast<std::uint64_t>(i) + static_cast<std::uint64_t>(n) * (j + static_cast<std::uint64_t>(n) * k);
  };
  // Global edge key -> welded vertex index.
  std::unordered_map<std::uint64_t, int> edge_vertex;

  for (int k = 0; k + 1 < n; ++k)
    for (int j = 0; j + 1 < n; ++j)
      for (int i = 0; i + 1 < n; ++i) {
        double val[8];
        for (int c = 0; c < 8; ++c)
          val[c] = grid.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);

        int cube_index = 0;
        for (int c = 0; c < 8; ++c)
          if (val[c] < iso) cube_index |= 1 << c;
        if (kEdgeTable[cube_index] == 0) continue;

        int vert[12];
        for (int e = 0; e < 12; ++e) {
          if (!(kEdgeTable[cube_index] & (1 << e))) continue;
          const int ca = kEdgeCorners[e][0], cb = kEdgeCorners[e][1];
          const int ia = i + kCorner[ca][0], ja = j + kCorner[ca][1], ka = k + kCorner[ca][2];
          const int ib = i + kCorner[cb][0], jb = j + kCorner[cb][1], kb = k + kCorner[cb][2];
          std::uint64_t ga = corner_index(ia, ja, ka);
          std::uint64_t gb = corner_index(ib, jb, kb);
          // Canonical endpoint order makes the interpolated position identical
          // no matter which adjacent cell asks.
          bool swapped = ga > gb;
          if (swapped) std::swap(ga, gb);
          const std::uint64_t key = (ga << 32) | gb;
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            Point3 pa = swapped ? grid.point_at(ib, jb, kb) : grid.point_at(ia, ja, ka);
            Point3 pb = swapped ? grid.point_at(ia, ja, ka) : grid.point_at(ib, jb, kb);
            const double va = swapped ? val[cb] : val[ca];
            const double vb = swapped ? val[ca] : val[cb];
            double t = (vb == va) ? 0.5 : (iso - va) / (vb - va);
            t = std::min(1.0, std::max(0.0, t));
            const Point3 p = pa + (pb - pa) * t;
            it = edge_vertex.emplace(key, static_cast<int>(mesh.vertices.size())).first;
            mesh.vertices.push_back(p);
          }
          vert[e] = it->second;
        }

        const int* tris = kTriTable[cube_index];
        for (int t = 0; tris[t] != -1; t += 3) {
          const int a = vert[tris[t]], b = vert[tris[t + 1]], c = vert[tris[t + 2]];
          if (a == b || b == c || a == c) continue;  // collapsed edge hit a lattice corner
          mesh.triangles.push_back({a, b, c});
        }
      }
  return mesh;
}

}  // namespace occm
