// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mipgrid {

const char* to_string(Family family) { return family == Family::vm ? "vm" : "planes"; }

Family family_from_string(const std::string_view& name) {
  if (name == "vm") return Family::vm;
  if (name == "planes") return Family::planes;
  throw std::invalid_argument("unknown model family '" + std::string(name) + "' (expected vm|planes)");
}

FactorGrid FactorGrid::zeros(Family family, Resolution res, int rank) {
  if (rank < 1) throw std::invalid_argument("grid rank must be positive");
  if (res.x < 2 || res.y < 2 || res.z < 2) throw std::invalid_argument("grid resolution must be >= 2 per axis");
  FactorGrid g;
  g.family = family;
  g.res = res;
  g.rank = rank;
  for (int a = 0; a < 3; ++a) {
    if (family == Family::vm) g.vectors[a].assign(static_cast<std::size_t>(rank) * res[a], 0.0);
    g.planes[a].assign(static_cast<std::size_t>(rank) * g.plane_rows(a) * g.plane_cols(a), 0.0);
  }
  return g;
}

std::size_t FactorGrid::parameter_count() const {
  std::size_t n = 0;
  for (int a = 0; a < 3; ++a) n += vectors[a].size() + planes[a].size();
  return n;
}

bool FactorGrid::same_shape(const FactorGrid& other) const {
  return family == other.family && res == other.res && rank == other.rank;
}

void FactorGrid::validate() const {
  if (rank < 1) throw std::invalid_argument("grid rank must be positive");
  if (res.x < 2 || res.y < 2 || res.z < 2) throw std::invalid_argument("grid resolution must be >= 2 per axis");
  for (int a = 0; a < 3; ++a) {
    const std::size_t want_vec = family == Family::vm ? static_cast<std::size_t>(rank) * res[a] : 0;
    const std::size_t want_mat = static_cast<std::size_t>(rank) * plane_rows(a) * plane_cols(a);
    if (vectors[a].size() != want_vec || planes[a].size() != want_mat) {
      throw std::invalid_argument("factor array sizes do not match rank/resolution on axis " + std::to_string(a));
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(vectors[a].begin(), vectors[a].end(), finite) ||
        !std::all_of(planes[a].begin(), planes[a].end(), finite)) {
      throw std::invalid_argument("grid holds non-finite values on axis " + std::to_string(a));
    }
  }
}

void FactorGrid::axpy(double alpha, const FactorGrid& other) {
  if (!same_shape(other)) throw std::invalid_argument("axpy: grid shapes differ");
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < vectors[a].size(); ++i) vectors[a][i] += alpha * other.vectors[a][i];
    for (std::size_t i = 0; i < planes[a].size(); ++i) planes[a][i] += alpha * other.planes[a][i];
  }
}

void FactorGrid::fill(double value) {
  for (int a = 0; a < 3; ++a) {
    std::fill(vectors[a].begin(), vectors[a].end(), value);
    std::fill(planes[a].begin(), planes[a].end(), value);
  }
}

namespace {

DenseGrid3D allocate_dense(const Resolution& res, int rank, std::size_t budget) {
  const std::size_t elements = res.volume() * static_cast<std::size_t>(rank);
  if (elements > budget) {
    throw std::length_error("dense reconstruction needs " + std::to_string(elements) +
                            " elements, budget is " + std::to_string(budget));
  }
  DenseGrid3D dense;
  dense.res = res;
  dense.rank = rank;
  dense.data.assign(elements, 0.0);
  return dense;
}

}  // namespace

DenseGrid3D reconstruct_dense_vm(const FactorGrid& g, std::size_t element_budget) {
  if (g.family != Family::vm) throw std::invalid_argument("reconstruct_dense_vm needs a VM grid");
  DenseGrid3D dense = allocate_dense(g.res, g.rank, element_budget);
  for (int x = 0; x < g.res.x; ++x) {
    for (int y = 0; y < g.res.y; ++y) {
      for (int z = 0; z < g.res.z; ++z) {
        for (int r = 0; r < g.rank; ++r) {
          dense.at(x, y, z, r) = g.vec(0, r, x) * g.mat(0, r, y, z) + g.vec(1, r, y) * g.mat(1, r, x, z) +
                                 g.vec(2, r, z) * g.mat(2, r, x, y);
        }
      }
    }
  }
  return dense;
}

DenseGrid3D reconstruct_dense_planes(const FactorGrid& g, std::size_t element_budget) {
  if (g.family != Family::planes) throw std::invalid_argument("reconstruct_dense_planes needs a plane grid");
  DenseGrid3D dense = allocate_dense(g.res, g.rank, element_budget);
  for (int x = 0; x < g.res.x; ++x) {
    for (int y = 0; y < g.res.y; ++y) {
      for (int z = 0; z < g.res.z; ++z) {
        for (int r = 0; r < g.rank; ++r) {
          dense.at(x, y, z, r) = g.mat(0, r, y, z) * g.mat(1, r, x, z) * g.mat(2, r, x, y);
        }
      }
    }
  }
  return dense;
}

AxisStencil make_axis_stencil(int nodes, double coord) {
  const double clamped = std::clamp(coord, -1.0, 1.0);
  const double u = (clamped + 1.0) * 0.5 * (nodes - 1);
  AxisStencil s;
  s.lo = std::min(static_cast<int>(std::floor(u)), nodes - 2);
  s.hi = s.lo + 1;
  s.frac = u - s.lo;
  return s;
}

PointStencil make_stencil(const Resolution& res, const Vec3& p) {
  return {make_axis_stencil(res.x, p[0]), make_axis_stencil(res.y, p[1]), make_axis_stencil(res.z, p[2])};
}

namespace {

inline double lerp1(const double* v, const AxisStencil& s) { return (1.0 - s.frac) * v[s.lo] + s.frac * v[s.hi]; }

inline double lerp2(const double* m, int cols, const AxisStencil& r, const AxisStencil& c) {
  const double* row0 = m + static_cast<std::size_t>(r.lo) * cols;
  const double* row1 = m + static_cast<std::size_t>(r.hi) * cols;
  const double top = (1.0 - c.frac) * row0[c.lo] + c.frac * row0[c.hi];
  const double bottom = (1.0 - c.frac) * row1[c.lo] + c.frac * row1[c.hi];
  return (1.0 - r.frac) * top + r.frac * bottom;
}

inline void scatter1(double* v, const AxisStencil& s, double g) {
  v[s.lo] += (1.0 - s.frac) * g;
  v[s.hi] += s.frac * g;
}

inline void scatter2(double* m, int cols, const AxisStencil& r, const AxisStencil& c, double g) {
  double* row0 = m + static_cast<std::size_t>(r.lo) * cols;
  double* row1 = m + static_cast<std::size_t>(r.hi) * cols;
  const double g0 = (1.0 - r.frac) * g;
  const double g1 = r.frac * g;
  row0[c.lo] += (1.0 - c.frac) * g0;
  row0[c.hi] += c.frac * g0;
  row1[c.lo] += (1.0 - c.frac) * g1;
  row1[c.hi] += c.frac * g1;
}

}  // namespace

void sample_features(const FactorGrid& g, const PointStencil& st, std::span<double> out) {
  if (g.family == Family::vm) {
    for (int a = 0; a < 3; ++a) {
      const int n = g.res[a];
      const int rows = g.plane_rows(a);
      const int cols = g.plane_cols(a);
      const AxisStencil& rs = st[kPlaneAxes[a][0]];
      const AxisStencil& cs = st[kPlaneAxes[a][1]];
      for (int r = 0; r < g.rank; ++r) {
        const double v = lerp1(g.vectors[a].data() + static_cast<std::size_t>(r) * n, st[a]);
        const double m = lerp2(g.planes[a].data() + static_cast<std::size_t>(r) * rows * cols, cols, rs, cs);
        out[a * g.rank + r] = v * m;
      }
    }
    return;
  }
  for (int r = 0; r < g.rank; ++r) out[r] = 1.0;
  for (int a = 0; a < 3; ++a) {
    const int rows = g.plane_rows(a);
    const int cols = g.plane_cols(a);
    const AxisStencil& rs = st[kPlaneAxes[a][0]];
    const AxisStencil& cs = st[kPlaneAxes[a][1]];
    for (int r = 0; r < g.rank; ++r) {
      out[r] *= lerp2(g.planes[a].data() + static_cast<std::size_t>(r) * rows * cols, cols, rs, cs);
    }
  }
}

void sample_features_backward(const FactorGrid& g, const PointStencil& st, std::span<const double> grad_features,
                              FactorGrid& grad) {
  if (g.family == Family::vm) {
    for (int a = 0; a < 3; ++a) {
      const int n = g.res[a];
      const int rows = g.plane_rows(a);
      const int cols = g.plane_cols(a);
      const AxisStencil& rs = st[kPlaneAxes[a][0]];
      const AxisStencil& cs = st[kPlaneAxes[a][1]];
      for (int r = 0; r < g.rank; ++r) {
        const double gf = grad_features[a * g.rank + r];
        if (gf == 0.0) continue;
        const std::size_t voff = static_cast<std::size_t>(r) * n;
        const std::size_t moff = static_cast<std::size_t>(r) * rows * cols;
        const double v = lerp1(g.vectors[a].data() + voff, st[a]);
        const double m = lerp2(g.planes[a].data() + moff, cols, rs, cs);
        scatter1(grad.vectors[a].data() + voff, st[a], gf * m);
        scatter2(grad.planes[a].data() + moff, cols, rs, cs, gf * v);
      }
    }
    return;
  }
  for (int r = 0; r < g.rank; ++r) {
    const double gf = grad_features[r];
    if (gf == 0.0) continue;
    std::array<double, 3> vals{};
    for (int a = 0; a < 3; ++a) {
      const int rows = g.plane_rows(a);
      const int cols = g.plane_cols(a);
      vals[a] = lerp2(g.planes[a].data() + static_cast<std::size_t>(r) * rows * cols, cols, st[kPlaneAxes[a][0]],
                      st[kPlaneAxes[a][1]]);
    }
    for (int a = 0; a < 3; ++a) {
      const int rows = g.plane_rows(a);
      const int cols = g.plane_cols(a);
      const double others = vals[(a + 1) % 3] * vals[(a + 2) % 3];
      scatter2(grad.planes[a].data() + static_cast<std::size_t>(r) * rows * cols, cols, st[kPlaneAxes[a][0]],
               st[kPlaneAxes[a][1]], gf * others);
    }
  }
}

std::vector<double> sample_vm(const FactorGrid& grid, const Vec3& p) {
  if (grid.family != Family::vm) throw std::invalid_argument("sample_vm needs a VM grid");
  std::vector<double> out(grid.feature_count());
  sample_features(grid, make_stencil(grid.res, p), out);
  return out;
}

std::vector<double> sample_planes(const FactorGrid& grid, const Vec3& p) {
  if (grid.family != Family::planes) throw std::invalid_argument("sample_planes needs a plane grid");
  std::vector<double> out(grid.feature_count());
  sample_features(grid, make_stencil(grid.res, p), out);
  return out;
}

std::vector<double> sample_dense(const DenseGrid3D& dense, const Vec3& p) {
  const PointStencil st = make_stencil(dense.res, p);
  std::vector<double> out(dense.rank, 0.0);
  for (int dx = 0; dx < 2; ++dx) {
    const int x = dx ? st[0].hi : st[0].lo;
    const double wx = dx ? st[0].frac : 1.0 - st[0].frac;
    for (int dy = 0; dy < 2; ++dy) {
      const int y = dy ? st[1].hi : st[1].lo;
      const double wy = dy ? st[1].frac : 1.0 - st[1].frac;
      for (int dz = 0; dz < 2; ++dz) {
        const int z = dz ? st[2].hi : st[2].lo;
        const double wz = dz ? st[2].frac : 1.0 - st[2].frac;
        for (int r = 0; r < dense.rank; ++r) out[r] += wx * wy * wz * dense.at(x, y, z, r);
      }
    }
  }
  return out;
}

std::vector<double> resample_linear(std::span<const double> values, int new_size) {
  const int old_size = static_cast<int>(values.size());
  if (new_size < old_size) throw std::invalid_argument("upsample cannot shrink a resolution");
  std::vector<double> out(new_size);
  if (new_size == old_size) {
    std::copy(values.begin(), values.end(), out.begin());
    return out;
  }
  // Integer arithmetic keeps coinciding nodes exact.
  const long den = new_size - 1;
  for (int j = 0; j < new_size; ++j) {
    const long num = static_cast<long>(j) * (old_size - 1);
    const long lo = num / den;
    const long rem = num % den;
    if (rem == 0) {
      out[j] = values[lo];
    } else {
      const double f = static_cast<double>(rem) / static_cast<double>(den);
      out[j] = (1.0 - f) * values[lo] + f * values[lo + 1];
    }
  }
  return out;
}

namespace {

std::vector<double> resample_plane(std::span<const double> plane, int rows, int cols, int new_rows, int new_cols) {
  std::vector<double> tmp(static_cast<std::size_t>(rows) * new_cols);
  for (int i = 0; i < rows; ++i) {
    auto row = resample_linear(plane.subspan(static_cast<std::size_t>(i) * cols, cols), new_cols);
    std::copy(row.begin(), row.end(), tmp.begin() + static_cast<std::size_t>(i) * new_cols);
  }
  std::vector<double> out(static_cast<std::size_t>(new_rows) * new_cols);
  std::vector<double> column(rows);
  for (int j = 0; j < new_cols; ++j) {
    for (int i = 0; i < rows; ++i) column[i] = tmp[static_cast<std::size_t>(i) * new_cols + j];
    auto resampled = resample_linear(column, new_rows);
    for (int i = 0; i < new_rows; ++i) out[static_cast<std::size_t>(i) * new_cols + j] = resampled[i];
  }
  return out;
}

}  // namespace

FactorGrid upsample(const FactorGrid& grid, Resolution new_res) {
  for (int a = 0; a < 3; ++a) {
    if (new_res[a] < grid.res[a]) throw std::invalid_argument("upsample cannot shrink a resolution");
  }
  if (new_res == grid.res) return grid;
  FactorGrid out = FactorGrid::zeros(grid.family, new_res, grid.rank);
  for (int a = 0; a < 3; ++a) {
    for (int r = 0; r < grid.rank; ++r) {
      if (grid.family == Family::vm) {
        std::span<const double> v(grid.vectors[a].data() + static_cast<std::size_t>(r) * grid.res[a], grid.res[a]);
        auto nv = resample_linear(v, new_res[a]);
        std::copy(nv.begin(), nv.end(), out.vectors[a].begin() + static_cast<std::size_t>(r) * new_res[a]);
      }
      const int rows = grid.plane_rows(a);
      const int cols = grid.plane_cols(a);
      const int new_rows = out.plane_rows(a);
      const int new_cols = out.plane_cols(a);
      std::span<const double> m(grid.planes[a].data() + static_cast<std::size_t>(r) * rows * cols,
                                static_cast<std::size_t>(rows) * cols);
      auto nm = resample_plane(m, rows, cols, new_rows, new_cols);
      std::copy(nm.begin(), nm.end(), out.planes[a].begin() + static_cast<std::size_t>(r) * new_rows * new_cols);
    }
  }
  return out;
}

}  // namespace mipgrid
