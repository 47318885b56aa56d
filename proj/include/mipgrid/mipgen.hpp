// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mipgrid/grid.hpp"

namespace mipgrid {

// Learnable depth-wise kernels that turn one shared factor grid into S
// filtered copies. Scale 0 is the highest scale (full resolution), scale S-1
// the lowest.
//
// VM banks carry, per scale, axis and rank, a 1-D kernel for the axis vector
// and a KxK kernel for the complementary matrix. Plane banks only carry the
// KxK kernels.
struct MipKernelBank {
  Family family = Family::vm;
  int scales = 2;
  int kernel_size = 3;
  int rank = 1;
  bool trainable = true;
  std::vector<double> kernels_1d;  // [scale][axis][rank][K]; empty for planes
  std::vector<double> kernels_2d;  // [scale][axis][rank][K][K]

  // Center tap 1, everything else 0.
  static MipKernelBank identity(Family family, int rank, int scales, int kernel_size);

  std::size_t offset_1d(int scale, int axis, int r) const {
    return ((static_cast<std::size_t>(scale) * 3 + axis) * rank + r) * kernel_size;
  }
  std::size_t offset_2d(int scale, int axis, int r) const {
    return ((static_cast<std::size_t>(scale) * 3 + axis) * rank + r) * kernel_size * kernel_size;
  }
  std::span<double> kernel_1d(int scale, int axis, int r) {
    return {kernels_1d.data() + offset_1d(scale, axis, r), static_cast<std::size_t>(kernel_size)};
  }
  std::span<const double> kernel_1d(int scale, int axis, int r) const {
    return {kernels_1d.data() + offset_1d(scale, axis, r), static_cast<std::size_t>(kernel_size)};
  }
  std::span<double> kernel_2d(int scale, int axis, int r) {
    return {kernels_2d.data() + offset_2d(scale, axis, r), static_cast<std::size_t>(kernel_size * kernel_size)};
  }
  std::span<const double> kernel_2d(int scale, int axis, int r) const {
    return {kernels_2d.data() + offset_2d(scale, axis, r), static_cast<std::size_t>(kernel_size * kernel_size)};
  }

  bool same_shape(const MipKernelBank& other) const;
  void validate() const;
  // Throws unless the bank's family and rank match the grid.
  void check_compatible(const FactorGrid& grid) const;
  void fill(double value);
};

// One generated grid per scale; all share the shared grid's shape.
using MultiScaleGrid = std::vector<FactorGrid>;

// Discrete Gaussian, normalized to sum 1.
std::vector<double> gaussian_kernel_1d(int kernel_size, double stdev);

// stdevs[i] sets every kernel of scale i; 2-D kernels are outer products.
MipKernelBank init_gaussian(Family family, int rank, int scales, int kernel_size, std::span<const double> stdevs);

// Replicate-padded, centered sliding window:
// out[i] = sum_j k[j] * in[clamp(i + j - K/2)].
void conv1d_replicate(std::span<const double> in, std::span<const double> kernel, std::span<double> out);
void conv2d_replicate(std::span<const double> in, int rows, int cols, std::span<const double> kernel, int kernel_size,
                      std::span<double> out);

// Adjoint of the convolutions above; both accumulate (+=).
void conv1d_replicate_backward(std::span<const double> in, std::span<const double> kernel,
                               std::span<const double> grad_out, std::span<double> grad_in,
                               std::span<double> grad_kernel);
void conv2d_replicate_backward(std::span<const double> in, int rows, int cols, std::span<const double> kernel,
                               int kernel_size, std::span<const double> grad_out, std::span<double> grad_in,
                               std::span<double> grad_kernel);

MultiScaleGrid generate_vm(const FactorGrid& shared, const MipKernelBank& bank);
MultiScaleGrid generate_planes(const FactorGrid& shared, const MipKernelBank& bank);
MultiScaleGrid generate(const FactorGrid& shared, const MipKernelBank& bank);

// Given d(loss)/d(generated grids), accumulates gradients for the shared grid
// and (when grad_bank is non-null) for the kernels.
void generate_backward(const FactorGrid& shared, const MipKernelBank& bank, const MultiScaleGrid& grad_generated,
                       FactorGrid& grad_shared, MipKernelBank* grad_bank);

// Convolves each rank component of a dense tensor with the separable 3-D
// kernel k1 (along vector_axis) times k2 (over the complementary plane,
// rows/columns ordered as kPlaneAxes[vector_axis]). Replicate padding.
DenseGrid3D dense_conv3d_oracle(const DenseGrid3D& dense, std::span<const double> k1, std::span<const double> k2,
                                int vector_axis, std::size_t element_budget = kDenseElementBudget);

// Variance of the tap positions around the center, weighted by the taps and
// divided by their sum. NaN when the sum is <= 1e-8.
double kernel_second_moment_1d(std::span<const double> kernel);
// Radial version for KxK kernels: weights times (dy^2 + dx^2).
double kernel_second_moment_2d(std::span<const double> kernel, int kernel_size);

struct KernelMoment {
  std::string kind;  // "1d" or "2d"
  int axis = 0;
  int rank = 0;
  double moment = 0.0;
};

// Every kernel of one scale: 3 axes x R ranks x (1-D, 2-D) for VM banks.
std::vector<KernelMoment> kernel_second_moments(const MipKernelBank& bank, int scale);
double mean_kernel_second_moment(const MipKernelBank& bank, int scale);

}  // namespace mipgrid
