// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace mipgrid {

using Vec3 = std::array<double, 3>;

enum class Family : std::uint8_t { vm = 0, planes = 1 };

const char* to_string(Family family);
Family family_from_string(const std::string_view& name);

// Node counts along X, Y, Z (H, W, L for VM grids; D_x, D_y, D_z for planes).
struct Resolution {
  int x = 2;
  int y = 2;
  int z = 2;

  int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  std::size_t volume() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  bool operator==(const Resolution&) const = default;
};

// The plane orthogonal to axis a spans axes kPlaneAxes[a][0] (rows) and
// kPlaneAxes[a][1] (columns): YZ, XZ, XY.
inline constexpr std::array<std::array<int, 2>, 3> kPlaneAxes = {{{1, 2}, {0, 2}, {0, 1}}};

// Factorized 3-D feature grid.
//
// VM family: rank R vector-matrix terms per axis, v_r^a (length res[a]) times
// M_r^a over the complementary plane. Features are the 3R unreduced products.
// Planes family: three planes per rank multiplied together; R features.
//
// Storage is rank-major: vectors[a][r * n + i] and
// planes[a][(r * rows + i) * cols + j].
struct FactorGrid {
  Family family = Family::vm;
  Resolution res;
  int rank = 1;
  std::array<std::vector<double>, 3> vectors;  // empty for the planes family
  std::array<std::vector<double>, 3> planes;

  static FactorGrid zeros(Family family, Resolution res, int rank);

  int feature_count() const { return family == Family::vm ? 3 * rank : rank; }
  int plane_rows(int axis) const { return res[kPlaneAxes[axis][0]]; }
  int plane_cols(int axis) const { return res[kPlaneAxes[axis][1]]; }

  double& vec(int axis, int r, int i) { return vectors[axis][static_cast<std::size_t>(r) * res[axis] + i]; }
  double vec(int axis, int r, int i) const { return vectors[axis][static_cast<std::size_t>(r) * res[axis] + i]; }
  double& mat(int axis, int r, int i, int j) {
    return planes[axis][(static_cast<std::size_t>(r) * plane_rows(axis) + i) * plane_cols(axis) + j];
  }
  double mat(int axis, int r, int i, int j) const {
    return planes[axis][(static_cast<std::size_t>(r) * plane_rows(axis) + i) * plane_cols(axis) + j];
  }

  std::size_t parameter_count() const;
  bool same_shape(const FactorGrid& other) const;

  // Throws std::invalid_argument when shapes disagree, a resolution is < 2,
  // or a stored value is non-finite.
  void validate() const;

  // this += alpha * other (shapes must match).
  void axpy(double alpha, const FactorGrid& other);
  void fill(double value);
};

// Dense [x][y][z][r] tensor. Only used as a test oracle and for slices.
struct DenseGrid3D {
  Resolution res;
  int rank = 1;
  std::vector<double> data;

  double& at(int x, int y, int z, int r) { return data[index(x, y, z, r)]; }
  double at(int x, int y, int z, int r) const { return data[index(x, y, z, r)]; }
  std::size_t index(int x, int y, int z, int r) const {
    return ((static_cast<std::size_t>(x) * res.y + y) * res.z + z) * rank + r;
  }
};

inline constexpr std::size_t kDenseElementBudget = std::size_t{1} << 24;

// Sum over the three axis terms per rank (rank components are kept).
DenseGrid3D reconstruct_dense_vm(const FactorGrid& grid, std::size_t element_budget = kDenseElementBudget);
DenseGrid3D reconstruct_dense_planes(const FactorGrid& grid, std::size_t element_budget = kDenseElementBudget);

// Linear interpolation weights along one axis: (1 - frac) * a[lo] + frac * a[hi].
struct AxisStencil {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

using PointStencil = std::array<AxisStencil, 3>;

// Corner-aligned convention: node i of n sits at -1 + 2i/(n-1). Points
// outside [-1, 1] are clamped to the boundary.
AxisStencil make_axis_stencil(int nodes, double coord);
PointStencil make_stencil(const Resolution& res, const Vec3& p);

// Writes grid.feature_count() values into out.
void sample_features(const FactorGrid& grid, const PointStencil& stencil, std::span<double> out);

// Accumulates d(loss)/d(grid values) into grad given d(loss)/d(features).
void sample_features_backward(const FactorGrid& grid, const PointStencil& stencil,
                              std::span<const double> grad_features, FactorGrid& grad);

std::vector<double> sample_vm(const FactorGrid& grid, const Vec3& p);
std::vector<double> sample_planes(const FactorGrid& grid, const Vec3& p);

// Trilinear interpolation of a dense grid (rank components), same convention.
std::vector<double> sample_dense(const DenseGrid3D& dense, const Vec3& p);

// Resamples every factor onto a finer corner-aligned lattice.
FactorGrid upsample(const FactorGrid& grid, Resolution new_res);
std::vector<double> resample_linear(std::span<const double> values, int new_size);

}  // namespace mipgrid
