#include "occm/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace occm {

namespace {
constexpr double kPi = 3.14159265358979323846;

struct ViewBasis {
  Point3 right, up, forward;
};

ViewBasis camera_basis(const Camera& cam) {
  const Point3 f = (cam.target - cam.eye).normalized();
  const Point3 r = f.cross(cam.up).normalized();
  const Point3 u = r.cross(f);
  return {r, u, f};
}
}  // namespace

void Camera::validate() const {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ConfigError("camera: fov out of (0,180)");
  if (width < 1 || height < 1) throw ConfigError("camera: image size must be >= 1");
  if (near_plane <= 0.0) throw ConfigError("camera: near plane must be positive");
  if ((target - eye).norm() == 0.0) throw ConfigError("camera: eye equals target");
}

std::size_t BinaryMask::count() const {
  std::size_t c = 0;
  for (std::uint8_t b : bits) c += b != 0;
  return c;
}

DepthBuffer::DepthBuffer(int w, int h)
    : width(w),
      height(h),
      depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()),
      owner(static_cast<std::size_t>(w) * h, -1) {}

void rasterize_mesh(const Mesh& mesh, const Camera& cam, int owner_id, DepthBuffer& buf) {
  cam.validate();
  if (mesh.empty()) return;

  const ViewBasis basis = camera_basis(cam);
  const double tan_half = std::tan(0.5 * cam.fov_deg * kPi / 180.0);
  const double aspect = static_cast<double>(cam.width) / cam.height;

  // Per-vertex: screen x/y in pixels, view-space z.
  struct Projected {
    double x, y, z;
  };
  std::vector<Projected> proj(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Point3 d = mesh.vertices[i] - cam.eye;
    const double z = d.dot(basis.forward);
    const double xc = d.dot(basis.right);
    const double yc = d.dot(basis.up);
    proj[i].z = z;
    if (z > 0.0) {
      const double xn = xc / (z * tan_half * aspect);
      const double yn = yc / (z * tan_half);
      proj[i].x = (xn * 0.5 + 0.5) * cam.width;
      proj[i].y = (0.5 - yn * 0.5) * cam.height;
    } else {
      proj[i].x = proj[i].y = 0.0;
    }
  }

  for (const auto& tri : mesh.triangles) {
    const Projected& a = proj[tri[0]];
    const Projected& b = proj[tri[1]];
    const Projected& c = proj[tri[2]];
    if (a.z <= cam.near_plane || b.z <= cam.near_plane || c.z <= cam.near_plane) continue;

    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (area == 0.0) continue;
    const double sign = area > 0.0 ? 1.0 : -1.0;

    int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    int x1 = std::min(buf.width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}))));
    int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    int y1 = std::min(buf.height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}))));
    if (x0 > x1 || y0 > y1) continue;

    // Oriented edge functions; a top or left edge admits boundary pixels.
    struct EdgeFn {
      double a, b, c0;  // e(px,py) = a*px + b*py + c0
      bool top_left;
    };
    auto make_edge = [sign](const Projected& p, const Projected& q) {
      EdgeFn e;
      e.a = sign * (q.y - p.y) * -1.0;
      e.b = sign * (q.x - p.x);
      e.c0 = -(e.a * p.x + e.b * p.y);
      const double ey = sign * (q.y - p.y);
      const double ex = sign * (q.x - p.x);
      // screen-space y grows downward: top edge is horizontal with ex > 0,
      // left edge has ey > 0 for counterclockwise orientation.
      e.top_left = (ey == 0.0 && ex > 0.0) || (ey > 0.0);
      return e;
    };
    const EdgeFn e01 = make_edge(a, b);
    const EdgeFn e12 = make_edge(b, c);
    const EdgeFn e20 = make_edge(c, a);

    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = e12.a * px + e12.b * py + e12.c0;  // weight of vertex a
        const double w1 = e20.a * px + e20.b * py + e20.c0;
        const double w2 = e01.a * px + e01.b * py + e01.c0;
        const bool in0 = w0 > 0.0 || (w0 == 0.0 && e12.top_left);
        const bool in1 = w1 > 0.0 || (w1 == 0.0 && e20.top_left);
        const bool in2 = w2 > 0.0 || (w2 == 0.0 && e01.top_left);
        if (!(in0 && in1 && in2)) continue;
        // Edges are scaled by `sign`, so w0+w1+w2 == |area| and the weights
        // are valid barycentrics for either winding.
        const double denom = w0 + w1 + w2;
        if (denom == 0.0) continue;
        const double z = (w0 * a.z + w1 * b.z + w2 * c.z) / denom;
        const std::size_t idx = static_cast<std::size_t>(y) * buf.width + x;
        if (z < buf.depth[idx]) {
          buf.depth[idx] = z;
          buf.owner[idx] = owner_id;
        }
      }
    }
  }
}

std::uint8_t depth_shade(const Camera& cam, double z) {
  // Window the ramp around the subject distance so desk-scale scenes use most
  // of the gray range; anything at or before the window start stays 255.
  const double dist = (cam.eye - cam.target).norm();
  const double z_near = std::max(cam.near_plane, dist - 1.25);
  const double z_far = dist + 1.25;
  double t = (z_far - z) / (z_far - z_near);
  t = std::min(1.0, std::max(0.0, t));
  return static_cast<std::uint8_t>(std::lround(t * 255.0));
}

RasterImage project_mesh(const Mesh& mesh, const Camera& cam, Shading shading) {
  DepthBuffer buf(cam.width, cam.height);
  rasterize_mesh(mesh, cam, 0, buf);
  RasterImage img(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
      if (buf.owner[idx] < 0) continue;
      const std::uint8_t v =
          shading == Shading::silhouette ? 255 : depth_shade(cam, buf.depth[idx]);
      std::uint8_t* px = img.at(x, y);
      px[0] = px[1] = px[2] = v;
    }
  return img;
}

BinaryMask render_mask(const Mesh& mesh, const Camera& cam) {
  DepthBuffer buf(cam.width, cam.height);
  rasterize_mesh(mesh, cam, 0, buf);
  BinaryMask mask(cam.width, cam.height);
  for (std::size_t i = 0; i < buf.owner.size(); ++i) mask.bits[i] = buf.owner[i] >= 0 ? 1 : 0;
  return mask;
}

double occlusion_ratio(const BinaryMask& full, const BinaryMask& visible) {
  if (full.width != visible.width || full.height != visible.height)
    throw ShapeError("occlusion_ratio: mask dimensions differ");
  std::size_t full_count = 0, both = 0;
  for (std::size_t i = 0; i < full.bits.size(); ++i) {
    if (full.bits[i]) {
      ++full_count;
      if (visible.bits[i]) ++both;
    }
  }
  if (full_count == 0) return 0.0;
  return 1.0 - static_cast<double>(both) / static_cast<double>(full_count);
}

}  // namespace occm
