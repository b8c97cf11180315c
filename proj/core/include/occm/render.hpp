#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occm/mesh.hpp"

namespace occm {

struct Camera {
  Point3 eye{0.0, 0.0, 2.5};
  Point3 target{0.0, 0.0, 0.0};
  Point3 up{0.0, 1.0, 0.0};
  double fov_deg = 45.0;
  int width = 64;
  int height = 64;
  double near_plane = 0.1;

  void validate() const;
};

struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  RasterImage() = default;
  RasterImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
  std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0/1

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
};

// Shared depth buffer for composing several meshes into one frame.
struct DepthBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // view-space z, +inf where empty
  std::vector<int> owner;     // mesh id, -1 where empty

  DepthBuffer(int w, int h);
};

// Pinhole projection + half-space rasterization with top-left fill rule.
// Triangles with any vertex at or behind the near plane are culled.
void rasterize_mesh(const Mesh& mesh, const Camera& camera, int owner_id, DepthBuffer& buffer);

enum class Shading { silhouette, depth };

RasterImage project_mesh(const Mesh& mesh, const Camera& camera, Shading shading);
BinaryMask render_mask(const Mesh& mesh, const Camera& camera);

// Depth-based gray level for a view-space z under this camera (255 = at the
// near plane, fading with distance).
std::uint8_t depth_shade(const Camera& camera, double z);

// 1 - |visible AND full| / |full|; 0 when full is empty.
double occlusion_ratio(const BinaryMask& full, const BinaryMask& visible);

}  // namespace occm
