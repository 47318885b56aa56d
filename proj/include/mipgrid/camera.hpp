// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

#include "mipgrid/grid.hpp"

namespace mipgrid {

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 normalized(const Vec3& a) { return (1.0 / norm(a)) * a; }

// Row-major 4x4 rigid camera-to-world transform, OpenGL axes: the camera
// looks down its -z axis with +x right and +y up.
using Mat4 = std::array<double, 16>;

Mat4 identity_pose();
// Camera at eye looking at target.
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

// Pinhole camera; focal lengths and principal point in pixels.
struct CameraModel {
  double focal_x = 1.0;
  double focal_y = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;
  Mat4 camera_to_world = identity_pose();
  double near = 2.0;
  double far = 6.0;

  Vec3 origin() const { return {camera_to_world[3], camera_to_world[7], camera_to_world[11]}; }

  // Throws std::invalid_argument on non-positive focal lengths, near >= far,
  // or a rotation block that is not orthonormal within 1e-4.
  void validate() const;

  // Same pose at a new image size; intrinsics scale by the size ratio.
  CameraModel resized(int new_width, int new_height) const;
};

}  // namespace mipgrid
