#include "occm/geometry.hpp"

#include <cmath>
#include <string>

namespace occm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double Point3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Point3 Point3::normalized() const {
  const double n = norm();
  if (n == 0.0) throw InvalidInputError("cannot normalize zero vector");
  return {x / n, y / n, z / n};
}

bool Point3::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

Mat3 Mat3::rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return r;
}

Mat3 Mat3::rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {1, 0, 0, 0, c, -s, 0, s, c};
  return r;
}

Mat3 Mat3::axis_angle(const Point3& axis, double angle) {
  const Point3 u = axis.normalized();
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Mat3 r;
  r.m = {t * u.x * u.x + c,       t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y,
         t * u.x * u.y + s * u.z, t * u.y * u.y + c,       t * u.y * u.z - s * u.x,
         t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c};
  return r;
}

Point3 Mat3::apply(const Point3& p) const {
  return {m[0] * p.x + m[1] * p.y + m[2] * p.z,
          m[3] * p.x + m[4] * p.y + m[5] * p.z,
          m[6] * p.x + m[7] * p.y + m[8] * p.z};
}

Point3 Mat3::apply_transposed(const Point3& p) const {
  return {m[0] * p.x + m[3] * p.y + m[6] * p.z,
          m[1] * p.x + m[4] * p.y + m[7] * p.z,
          m[2] * p.x + m[5] * p.y + m[8] * p.z};
}

Mat3 Mat3::mul(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m[i * 3 + k] * o.m[k * 3 + j];
      r.m[i * 3 + j] = acc;
    }
  return r;
}

std::vector<double> positional_encode(const Point3& v, int bands) {
  if (!v.finite()) throw InvalidInputError("positional_encode: non-finite input point");
  if (bands < 0) throw InvalidInputError("positional_encode: negative band count");
  std::vector<double> out;
  out.reserve(3 + 6 * static_cast<std::size_t>(bands));
  out.push_back(v.x);
  out.push_back(v.y);
  out.push_back(v.z);
  for (int k = 0; k < bands; ++k) {
    const double f = std::ldexp(kPi, k);  // 2^k * pi
    for (double c : {v.x, v.y, v.z}) out.push_back(std::sin(f * c));
    for (double c : {v.x, v.y, v.z}) out.push_back(std::cos(f * c));
  }
  return out;
}

double analytic_sdf(const AnalyticShape& shape, const Point3& v) {
  const Point3 p = shape.rotation.apply_transposed(v - shape.translation);
  switch (shape.kind) {
    case ShapeKind::sphere: {
      const double r = shape.params[0];
      if (r <= 0.0) throw InvalidInputError("analytic_sdf: sphere radius must be positive");
      return p.norm() - r;
    }
    case ShapeKind::box: {
      const Point3 h{shape.params[0], shape.params[1], shape.params[2]};
      if (h.x <= 0.0 || h.y <= 0.0 || h.z <= 0.0)
        throw InvalidInputError("analytic_sdf: box half extents must be positive");
      const Point3 q{std::fabs(p.x) - h.x, std::fabs(p.y) - h.y, std::fabs(p.z) - h.z};
      const Point3 qpos{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
      return qpos.norm() + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
    }
    case ShapeKind::cylinder: {
      const double r = shape.params[0], hh = shape.params[1];
      if (r <= 0.0 || hh <= 0.0)
        throw InvalidInputError("analytic_sdf: cylinder size must be positive");
      const double dr = std::sqrt(p.x * p.x + p.z * p.z) - r;
      const double dy = std::fabs(p.y) - hh;
      const double ox = std::max(dr, 0.0), oy = std::max(dy, 0.0);
      return std::min(std::max(dr, dy), 0.0) + std::sqrt(ox * ox + oy * oy);
    }
  }
  throw InvalidInputError("analytic_sdf: unknown shape kind");
}

double union_sdf(const std::vector<AnalyticShape>& parts, const Point3& v) {
  if (parts.empty()) throw InvalidInputError("union_sdf: empty part list");
  double d = analytic_sdf(parts[0], v);
  for (std::size_t i = 1; i < parts.size(); ++i) d = std::min(d, analytic_sdf(parts[i], v));
  return d;
}

std::array<double, 3> shape_extents(const AnalyticShape& shape) {
  switch (shape.kind) {
    case ShapeKind::sphere: {
      const double d = 2.0 * shape.params[0];
      return {d, d, d};
    }
    case ShapeKind::box:
      return {2.0 * shape.params[0], 2.0 * shape.params[1], 2.0 * shape.params[2]};
    case ShapeKind::cylinder:
      return {2.0 * shape.params[0], 2.0 * shape.params[1], 2.0 * shape.params[0]};
  }
  return {0.0, 0.0, 0.0};
}

SdfGrid sample_grid(const std::function<double(const Point3&)>& field, int res) {
  if (res < 2) throw InvalidInputError("sample_grid: resolution must be >= 2");
  SdfGrid g;
  g.res = res;
  g.values.resize(static_cast<std::size_t>(res) * res * res);
  for (int k = 0; k < res; ++k)
    for (int j = 0; j < res; ++j)
      for (int i = 0; i < res; ++i) {
        const double v = field(g.point_at(i, j, k));
        if (!std::isfinite(v))
          throw InvalidInputError("sample_grid: non-finite field value at (" +
                                  std::to_string(i) + "," + std::to_string(j) + "," +
                                  std::to_string(k) + ")");
        g.at(i, j, k) = v;
      }
  return g;
}

}  // namespace occm
