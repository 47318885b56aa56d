// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/camera.hpp"

#include <stdexcept>

namespace mipgrid {

Mat4 identity_pose() { return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}; }

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 back = normalized(eye - target);
  Vec3 right = cross(up, back);
  if (norm(right) < 1e-12) right = cross(Vec3{0.0, 1.0, 0.0}, back);
  right = normalized(right);
  const Vec3 true_up = cross(back, right);
  return {right[0], true_up[0], back[0], eye[0],  //
          right[1], true_up[1], back[1], eye[1],  //
          right[2], true_up[2], back[2], eye[2],  //
          0.0,      0.0,        0.0,     1.0};
}

void CameraModel::validate() const {
  if (!(focal_x > 0.0) || !(focal_y > 0.0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (width < 1 || height < 1) throw std::invalid_argument("camera image size must be positive");
  if (!(near < far)) throw std::invalid_argument("camera near plane must be before the far plane");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += camera_to_world[k * 4 + i] * camera_to_world[k * 4 + j];
      if (std::abs(d - (i == j ? 1.0 : 0.0)) > 1e-4) {
        throw std::invalid_argument("camera rotation block is not orthonormal");
      }
    }
  }
}

CameraModel CameraModel::resized(int new_width, int new_height) const {
  if (new_width < 1 || new_height < 1) throw std::invalid_argument("resized camera needs a positive size");
  CameraModel out = *this;
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  out.width = new_width;
  out.height = new_height;
  out.focal_x = focal_x * sx;
  out.focal_y = focal_y * sy;
  out.cx = cx * sx;
  out.cy = cy * sy;
  return out;
}

}  // namespace mipgrid
