#pragma once

#include <array>
#include <functional>
#include <vector>

#include "occm/common.hpp"

namespace occm {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
  Point3 cross(const Point3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const;
  Point3 normalized() const;
  bool finite() const;
};

// Row-major 3x3 rotation.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 rotation_z(double angle);
  static Mat3 rotation_x(double angle);
  static Mat3 axis_angle(const Point3& axis, double angle);

  Point3 apply(const Point3& p) const;
  // R^T p (world -> local for a pure rotation).
  Point3 apply_transposed(const Point3& p) const;
  Mat3 mul(const Mat3& o) const;
};

// [x, y, z, sin(2^k pi c), cos(2^k pi c) for k in 0..bands-1, c in {x,y,z}];
// length 3 + 6*bands.
std::vector<double> positional_encode(const Point3& v, int bands);

enum class ShapeKind { sphere, box, cylinder };

// Rigidly posed analytic primitive.
//   sphere:   params[0] = radius
//   box:      params = half extents
//   cylinder: params[0] = radius, params[1] = half height (local y axis)
struct AnalyticShape {
  ShapeKind kind = ShapeKind::sphere;
  std::array<double, 3> params{0.5, 0.0, 0.0};
  Mat3 rotation;
  Point3 translation;
};

// Exact signed distance: negative inside, positive outside.
double analytic_sdf(const AnalyticShape& shape, const Point3& v);

// min over parts (union).
double union_sdf(const std::vector<AnalyticShape>& parts, const Point3& v);

// Axis-aligned world-space extents (diameters) of the shape before rotation.
std::array<double, 3> shape_extents(const AnalyticShape& shape);

// Corner-aligned samples of a scalar field over [-1,1]^3.
struct SdfGrid {
  int res = 0;
  std::vector<double> values;  // res^3, index (i + res*(j + res*k)) for (x=i, y=j, z=k)

  double at(int i, int j, int k) const { return values[i + static_cast<std::size_t>(res) * (j + static_cast<std::size_t>(res) * k)]; }
  double& at(int i, int j, int k) { return values[i + static_cast<std::size_t>(res) * (j + static_cast<std::size_t>(res) * k)]; }
  double coord(int i) const { return -1.0 + 2.0 * i / (res - 1); }
  Point3 point_at(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
};

SdfGrid sample_grid(const std::function<double(const Point3&)>& field, int res);

}  // namespace occm
