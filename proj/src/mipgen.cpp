// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/mipgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mipgrid {

MipKernelBank MipKernelBank::identity(Family family, int rank, int scales, int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("kernel size must be odd and positive");
  if (scales < 1) throw std::invalid_argument("kernel bank needs at least one scale");
  if (rank < 1) throw std::invalid_argument("kernel bank rank must be positive");
  MipKernelBank bank;
  bank.family = family;
  bank.scales = scales;
  bank.kernel_size = kernel_size;
  bank.rank = rank;
  const std::size_t count = static_cast<std::size_t>(scales) * 3 * rank;
  const int c = kernel_size / 2;
  if (family == Family::vm) {
    bank.kernels_1d.assign(count * kernel_size, 0.0);
    for (std::size_t k = 0; k < count; ++k) bank.kernels_1d[k * kernel_size + c] = 1.0;
  }
  bank.kernels_2d.assign(count * kernel_size * kernel_size, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    bank.kernels_2d[k * kernel_size * kernel_size + c * kernel_size + c] = 1.0;
  }
  return bank;
}

bool MipKernelBank::same_shape(const MipKernelBank& o) const {
  return family == o.family && scales == o.scales && kernel_size == o.kernel_size && rank == o.rank &&
         kernels_1d.size() == o.kernels_1d.size() && kernels_2d.size() == o.kernels_2d.size();
}

void MipKernelBank::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("kernel size must be odd and positive");
  if (scales < 2) throw std::invalid_argument("a kernel bank needs S >= 2 scales");
  const std::size_t count = static_cast<std::size_t>(scales) * 3 * rank;
  const std::size_t want_1d = family == Family::vm ? count * kernel_size : 0;
  if (kernels_1d.size() != want_1d || kernels_2d.size() != count * kernel_size * kernel_size) {
    throw std::invalid_argument("kernel bank arrays do not match scales/rank/kernel size");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(kernels_1d.begin(), kernels_1d.end(), finite) ||
      !std::all_of(kernels_2d.begin(), kernels_2d.end(), finite)) {
    throw std::invalid_argument("kernel bank holds non-finite weights");
  }
}

void MipKernelBank::check_compatible(const FactorGrid& grid) const {
  if (grid.family != family) throw std::invalid_argument("kernel bank family does not match the grid");
  if (grid.rank != rank) {
    throw std::invalid_argument("kernel bank rank " + std::to_string(rank) + " does not match grid rank " +
                                std::to_string(grid.rank));
  }
}

void MipKernelBank::fill(double value) {
  std::fill(kernels_1d.begin(), kernels_1d.end(), value);
  std::fill(kernels_2d.begin(), kernels_2d.end(), value);
}

std::vector<double> gaussian_kernel_1d(int kernel_size, double stdev) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("kernel size must be odd and positive");
  if (!(stdev > 0.0)) throw std::invalid_argument("Gaussian stdev must be positive");
  std::vector<double> w(kernel_size);
  const double c = (kernel_size - 1) / 2.0;
  double sum = 0.0;
  for (int j = 0; j < kernel_size; ++j) {
    const double d = j - c;
    w[j] = std::exp(-d * d / (2.0 * stdev * stdev));
    sum += w[j];
  }
  for (double& v : w) v /= sum;
  return w;
}

MipKernelBank init_gaussian(Family family, int rank, int scales, int kernel_size, std::span<const double> stdevs) {
  if (static_cast<int>(stdevs.size()) != scales) {
    throw std::invalid_argument("need one stdev per scale (" + std::to_string(scales) + "), got " +
                                std::to_string(stdevs.size()));
  }
  MipKernelBank bank = MipKernelBank::identity(family, rank, scales, kernel_size);
  for (int s = 0; s < scales; ++s) {
    const std::vector<double> g = gaussian_kernel_1d(kernel_size, stdevs[s]);
    for (int a = 0; a < 3; ++a) {
      for (int r = 0; r < rank; ++r) {
        if (family == Family::vm) std::copy(g.begin(), g.end(), bank.kernel_1d(s, a, r).begin());
        auto k2 = bank.kernel_2d(s, a, r);
        for (int i = 0; i < kernel_size; ++i) {
          for (int j = 0; j < kernel_size; ++j) k2[i * kernel_size + j] = g[i] * g[j];
        }
      }
    }
  }
  return bank;
}

void conv1d_replicate(std::span<const double> in, std::span<const double> kernel, std::span<double> out) {
  const int n = static_cast<int>(in.size());
  const int k = static_cast<int>(kernel.size());
  const int c = k / 2;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < k; ++j) acc += kernel[j] * in[std::clamp(i + j - c, 0, n - 1)];
    out[i] = acc;
  }
}

void conv1d_replicate_backward(std::span<const double> in, std::span<const double> kernel,
                               std::span<const double> grad_out, std::span<double> grad_in,
                               std::span<double> grad_kernel) {
  const int n = static_cast<int>(in.size());
  const int k = static_cast<int>(kernel.size());
  const int c = k / 2;
  for (int i = 0; i < n; ++i) {
    const double g = grad_out[i];
    if (g == 0.0) continue;
    for (int j = 0; j < k; ++j) {
      const int src = std::clamp(i + j - c, 0, n - 1);
      if (!grad_in.empty()) grad_in[src] += kernel[j] * g;
      if (!grad_kernel.empty()) grad_kernel[j] += in[src] * g;
    }
  }
}

void conv2d_replicate(std::span<const double> in, int rows, int cols, std::span<const double> kernel, int kernel_size,
                      std::span<double> out) {
  const int c = kernel_size / 2;
  // Column indices are clamped once per output column.
  std::vector<int> col_idx(static_cast<std::size_t>(cols) * kernel_size);
  for (int x = 0; x < cols; ++x) {
    for (int b = 0; b < kernel_size; ++b) col_idx[x * kernel_size + b] = std::clamp(x + b - c, 0, cols - 1);
  }
  for (int y = 0; y < rows; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * cols;
    std::fill(dst, dst + cols, 0.0);
    for (int a = 0; a < kernel_size; ++a) {
      const double* src = in.data() + static_cast<std::size_t>(std::clamp(y + a - c, 0, rows - 1)) * cols;
      const double* krow = kernel.data() + static_cast<std::size_t>(a) * kernel_size;
      for (int x = 0; x < cols; ++x) {
        const int* ci = col_idx.data() + x * kernel_size;
        double acc = 0.0;
        for (int b = 0; b < kernel_size; ++b) acc += krow[b] * src[ci[b]];
        dst[x] += acc;
      }
    }
  }
}

void conv2d_replicate_backward(std::span<const double> in, int rows, int cols, std::span<const double> kernel,
                               int kernel_size, std::span<const double> grad_out, std::span<double> grad_in,
                               std::span<double> grad_kernel) {
  const int c = kernel_size / 2;
  std::vector<int> col_idx(static_cast<std::size_t>(cols) * kernel_size);
  for (int x = 0; x < cols; ++x) {
    for (int b = 0; b < kernel_size; ++b) col_idx[x * kernel_size + b] = std::clamp(x + b - c, 0, cols - 1);
  }
  for (int y = 0; y < rows; ++y) {
    const double* g = grad_out.data() + static_cast<std::size_t>(y) * cols;
    for (int a = 0; a < kernel_size; ++a) {
      const std::size_t src_row = static_cast<std::size_t>(std::clamp(y + a - c, 0, rows - 1)) * cols;
      const double* krow = kernel.data() + static_cast<std::size_t>(a) * kernel_size;
      for (int x = 0; x < cols; ++x) {
        const double gx = g[x];
        if (gx == 0.0) continue;
        const int* ci = col_idx.data() + x * kernel_size;
        for (int b = 0; b < kernel_size; ++b) {
          if (!grad_in.empty()) grad_in[src_row + ci[b]] += krow[b] * gx;
          if (!grad_kernel.empty()) grad_kernel[a * kernel_size + b] += in[src_row + ci[b]] * gx;
        }
      }
    }
  }
}

namespace {

void check_generation_inputs(const FactorGrid& shared, const MipKernelBank& bank) {
  bank.check_compatible(shared);
  const std::size_t count = static_cast<std::size_t>(bank.scales) * 3 * bank.rank;
  const std::size_t k = bank.kernel_size;
  if ((bank.family == Family::vm && bank.kernels_1d.size() != count * k) || bank.kernels_2d.size() != count * k * k) {
    throw std::invalid_argument("kernel bank arrays do not match scales/rank/kernel size");
  }
}

}  // namespace

MultiScaleGrid generate(const FactorGrid& shared, const MipKernelBank& bank) {
  check_generation_inputs(shared, bank);
  MultiScaleGrid out;
  out.reserve(bank.scales);
  for (int s = 0; s < bank.scales; ++s) {
    FactorGrid g = FactorGrid::zeros(shared.family, shared.res, shared.rank);
    for (int a = 0; a < 3; ++a) {
      const int rows = shared.plane_rows(a);
      const int cols = shared.plane_cols(a);
      const std::size_t plane = static_cast<std::size_t>(rows) * cols;
      for (int r = 0; r < shared.rank; ++r) {
        if (shared.family == Family::vm) {
          const std::size_t n = shared.res[a];
          conv1d_replicate(std::span<const double>(shared.vectors[a]).subspan(r * n, n), bank.kernel_1d(s, a, r),
                           std::span<double>(g.vectors[a]).subspan(r * n, n));
        }
        conv2d_replicate(std::span<const double>(shared.planes[a]).subspan(r * plane, plane), rows, cols,
                         bank.kernel_2d(s, a, r), bank.kernel_size,
                         std::span<double>(g.planes[a]).subspan(r * plane, plane));
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

MultiScaleGrid generate_vm(const FactorGrid& shared, const MipKernelBank& bank) {
  if (shared.family != Family::vm) throw std::invalid_argument("generate_vm needs a VM grid");
  return generate(shared, bank);
}

MultiScaleGrid generate_planes(const FactorGrid& shared, const MipKernelBank& bank) {
  if (shared.family != Family::planes) throw std::invalid_argument("generate_planes needs a plane grid");
  return generate(shared, bank);
}

void generate_backward(const FactorGrid& shared, const MipKernelBank& bank, const MultiScaleGrid& grad_generated,
                       FactorGrid& grad_shared, MipKernelBank* grad_bank) {
  check_generation_inputs(shared, bank);
  if (static_cast<int>(grad_generated.size()) != bank.scales) {
    throw std::invalid_argument("generated gradient count does not match the bank's scales");
  }
  for (int s = 0; s < bank.scales; ++s) {
    const FactorGrid& go = grad_generated[s];
    for (int a = 0; a < 3; ++a) {
      const int rows = shared.plane_rows(a);
      const int cols = shared.plane_cols(a);
      const std::size_t plane = static_cast<std::size_t>(rows) * cols;
      for (int r = 0; r < shared.rank; ++r) {
        if (shared.family == Family::vm) {
          const std::size_t n = shared.res[a];
          conv1d_replicate_backward(std::span<const double>(shared.vectors[a]).subspan(r * n, n),
                                    bank.kernel_1d(s, a, r), std::span<const double>(go.vectors[a]).subspan(r * n, n),
                                    std::span<double>(grad_shared.vectors[a]).subspan(r * n, n),
                                    grad_bank ? grad_bank->kernel_1d(s, a, r) : std::span<double>());
        }
        conv2d_replicate_backward(std::span<const double>(shared.planes[a]).subspan(r * plane, plane), rows, cols,
                                  bank.kernel_2d(s, a, r), bank.kernel_size,
                                  std::span<const double>(go.planes[a]).subspan(r * plane, plane),
                                  std::span<double>(grad_shared.planes[a]).subspan(r * plane, plane),
                                  grad_bank ? grad_bank->kernel_2d(s, a, r) : std::span<double>());
      }
    }
  }
}

DenseGrid3D dense_conv3d_oracle(const DenseGrid3D& dense, std::span<const double> k1, std::span<const double> k2,
                                int vector_axis, std::size_t element_budget) {
  const int k = static_cast<int>(k1.size());
  if (k % 2 == 0 || k2.size() != static_cast<std::size_t>(k * k)) {
    throw std::invalid_argument("oracle kernels must be odd-sized with a KxK companion");
  }
  if (vector_axis < 0 || vector_axis > 2) throw std::invalid_argument("vector axis must be 0, 1 or 2");
  if (dense.data.size() > element_budget) throw std::length_error("dense oracle input exceeds the element budget");
  const int c = k / 2;
  const int row_axis = kPlaneAxes[vector_axis][0];
  const int col_axis = kPlaneAxes[vector_axis][1];
  DenseGrid3D out = dense;
  std::fill(out.data.begin(), out.data.end(), 0.0);
  const std::array<int, 3> n = {dense.res.x, dense.res.y, dense.res.z};
  for (int x = 0; x < n[0]; ++x) {
    for (int y = 0; y < n[1]; ++y) {
      for (int z = 0; z < n[2]; ++z) {
        const std::array<int, 3> p = {x, y, z};
        for (int i = 0; i < k; ++i) {
          for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) {
              std::array<int, 3> q{};
              q[vector_axis] = std::clamp(p[vector_axis] + i - c, 0, n[vector_axis] - 1);
              q[row_axis] = std::clamp(p[row_axis] + a - c, 0, n[row_axis] - 1);
              q[col_axis] = std::clamp(p[col_axis] + b - c, 0, n[col_axis] - 1);
              const double w = k1[i] * k2[a * k + b];
              for (int r = 0; r < dense.rank; ++r) out.at(x, y, z, r) += w * dense.at(q[0], q[1], q[2], r);
            }
          }
        }
      }
    }
  }
  return out;
}

double kernel_second_moment_1d(std::span<const double> kernel) {
  const double c = (static_cast<double>(kernel.size()) - 1.0) / 2.0;
  double sum = 0.0;
  double moment = 0.0;
  for (std::size_t j = 0; j < kernel.size(); ++j) {
    const double d = static_cast<double>(j) - c;
    sum += kernel[j];
    moment += kernel[j] * d * d;
  }
  if (sum <= 1e-8) return std::numeric_limits<double>::quiet_NaN();
  return moment / sum;
}

double kernel_second_moment_2d(std::span<const double> kernel, int kernel_size) {
  const double c = (kernel_size - 1) / 2.0;
  double sum = 0.0;
  double moment = 0.0;
  for (int i = 0; i < kernel_size; ++i) {
    for (int j = 0; j < kernel_size; ++j) {
      const double w = kernel[static_cast<std::size_t>(i) * kernel_size + j];
      const double dy = i - c;
      const double dx = j - c;
      sum += w;
      moment += w * (dy * dy + dx * dx);
    }
  }
  if (sum <= 1e-8) return std::numeric_limits<double>::quiet_NaN();
  return moment / sum;
}

std::vector<KernelMoment> kernel_second_moments(const MipKernelBank& bank, int scale) {
  if (scale < 0 || scale >= bank.scales) throw std::out_of_range("scale index out of range");
  std::vector<KernelMoment> out;
  for (int a = 0; a < 3; ++a) {
    for (int r = 0; r < bank.rank; ++r) {
      if (bank.family == Family::vm) {
        out.push_back({"1d", a, r, kernel_second_moment_1d(bank.kernel_1d(scale, a, r))});
      }
      out.push_back({"2d", a, r, kernel_second_moment_2d(bank.kernel_2d(scale, a, r), bank.kernel_size)});
    }
  }
  return out;
}

double mean_kernel_second_moment(const MipKernelBank& bank, int scale) {
  const auto moments = kernel_second_moments(bank, scale);
  double sum = 0.0;
  for (const auto& m : moments) sum += m.moment;
  return sum / static_cast<double>(moments.size());
}

}  // namespace mipgrid
