// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mipgrid/mipgen.hpp"

using namespace mipgrid;

namespace {

FactorGrid random_grid(Family fam, Resolution res, int rank, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FactorGrid g = FactorGrid::zeros(fam, res, rank);
  for (auto& v : g.vectors)
    for (double& x : v) x = u(gen);
  for (auto& p : g.planes)
    for (double& x : p) x = u(gen);
  return g;
}

MipKernelBank random_bank(Family fam, int rank, int scales, int k, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-0.5, 1.0);
  MipKernelBank b = MipKernelBank::identity(fam, rank, scales, k);
  for (double& x : b.kernels_1d) x = u(gen);
  for (double& x : b.kernels_2d) x = u(gen);
  return b;
}

}  // namespace

TEST_CASE("gaussian kernels") {
  SUBCASE("one tap") { CHECK(gaussian_kernel_1d(1, 2.7) == std::vector<double>{1.0}); }
  SUBCASE("K=3, sigma 1") {
    // exp(-1/2) / (1 + 2 exp(-1/2)) and 1 / (1 + 2 exp(-1/2))
    const auto k = gaussian_kernel_1d(3, 1.0);
    CHECK(k[0] == doctest::Approx(0.27406).epsilon(2e-5));
    CHECK(k[1] == doctest::Approx(0.45186).epsilon(2e-5));
    CHECK(k[2] == k[0]);
  }
  SUBCASE("K=3, sigma 4 is nearly flat") {
    const auto k = gaussian_kernel_1d(3, 4.0);
    CHECK(*std::max_element(k.begin(), k.end()) - *std::min_element(k.begin(), k.end()) < 0.011);
  }
  SUBCASE("bank kernels sum to one, 2-D is the outer product") {
    const std::vector<double> sd{1.0, 1.5, 2.5, 4.0};
    const MipKernelBank b = init_gaussian(Family::vm, 2, 4, 3, sd);
    for (int s = 0; s < 4; ++s) {
      for (int a = 0; a < 3; ++a) {
        for (int r = 0; r < 2; ++r) {
          const auto k1 = b.kernel_1d(s, a, r);
          const auto k2 = b.kernel_2d(s, a, r);
          double s1 = 0.0, s2 = 0.0;
          for (double v : k1) s1 += v;
          for (double v : k2) s2 += v;
          CHECK(s1 == doctest::Approx(1.0).epsilon(1e-9));
          CHECK(s2 == doctest::Approx(1.0).epsilon(1e-9));
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(k2[i * 3 + j] == doctest::Approx(k1[i] * k1[j]).epsilon(1e-15));
        }
      }
    }
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(gaussian_kernel_1d(4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel_1d(3, 0.0), std::invalid_argument);
    const std::vector<double> sd{1.0, 2.0};
    CHECK_THROWS_AS(init_gaussian(Family::vm, 1, 3, 3, sd), std::invalid_argument);
  }
}

TEST_CASE("second moments") {
  const std::vector<double> identity{0.0, 1.0, 0.0}, uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(kernel_second_moment_1d(identity) == 0.0);
  CHECK(kernel_second_moment_1d(uniform) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(kernel_second_moment_1d(gaussian_kernel_1d(3, 1.0)) == doctest::Approx(0.54813).epsilon(2e-5));
  // Unnormalized kernels are normalized by their sum.
  const std::vector<double> scaled{2.0, 2.0, 2.0};
  CHECK(kernel_second_moment_1d(scaled) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  const std::vector<double> zero_sum{1.0, -2.0, 1.0};
  CHECK(std::isnan(kernel_second_moment_1d(zero_sum)));

  SUBCASE("paper stdev set gives strictly increasing moments") {
    const std::vector<double> sd{1.0, 1.5, 2.5, 4.0};
    for (Family fam : {Family::vm, Family::planes}) {
      const MipKernelBank b = init_gaussian(fam, 3, 4, 3, sd);
      for (int s = 1; s < 4; ++s) CHECK(mean_kernel_second_moment(b, s) > mean_kernel_second_moment(b, s - 1));
    }
  }
  SUBCASE("identity bank has zero moments") {
    const MipKernelBank b = MipKernelBank::identity(Family::vm, 2, 3, 3);
    for (int s = 0; s < 3; ++s) CHECK(mean_kernel_second_moment(b, s) == 0.0);
  }
}

TEST_CASE("replicate-padded convolution") {
  SUBCASE("1-D against a sliding window") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> in(8), k(3), out(8);
    for (double& v : in) v = u(gen);
    for (double& v : k) v = u(gen);
    conv1d_replicate(in, k, out);
    for (int i = 0; i < 8; ++i) {
      const double left = in[std::max(i - 1, 0)], right = in[std::min(i + 1, 7)];
      CHECK(out[i] == doctest::Approx(k[0] * left + k[1] * in[i] + k[2] * right).epsilon(1e-14));
    }
  }
  SUBCASE("2-D against a sliding window") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int rows = 5, cols = 4;
    std::vector<double> in(rows * cols), k(9), out(rows * cols);
    for (double& v : in) v = u(gen);
    for (double& v : k) v = u(gen);
    conv2d_replicate(in, rows, cols, k, 3, out);
    for (int y = 0; y < rows; ++y)
      for (int x = 0; x < cols; ++x) {
        double want = 0.0;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            want += k[a * 3 + b] * in[std::clamp(y + a - 1, 0, rows - 1) * cols + std::clamp(x + b - 1, 0, cols - 1)];
        CHECK(out[y * cols + x] == doctest::Approx(want).epsilon(1e-14));
      }
  }
}

TEST_CASE("multi-scale generation") {
  for (Family fam : {Family::vm, Family::planes}) {
    CAPTURE(fam);
    const FactorGrid g = random_grid(fam, {5, 6, 4}, 3, 3);

    SUBCASE("identity kernels copy the shared grid") {
      const MultiScaleGrid out = generate(g, MipKernelBank::identity(fam, 3, 4, 3));
      REQUIRE(out.size() == 4);
      for (const auto& s : out) {
        CHECK(s.vectors == g.vectors);
        CHECK(s.planes == g.planes);
      }
    }
    SUBCASE("constants survive any sum-one kernel") {
      FactorGrid c = FactorGrid::zeros(fam, {5, 6, 4}, 3);
      c.fill(0.7);
      const std::vector<double> sd{1.0, 1.5, 2.5, 4.0};
      for (const auto& s : generate(c, init_gaussian(fam, 3, 4, 3, sd))) {
        for (const auto& v : s.vectors)
          for (double x : v) REQUIRE(x == doctest::Approx(0.7).epsilon(1e-14));
        for (const auto& p : s.planes)
          for (double x : p) REQUIRE(x == doctest::Approx(0.7).epsilon(1e-14));
      }
    }
    SUBCASE("depth-wise: a rank's kernel only touches that rank") {
      MipKernelBank b = random_bank(fam, 3, 2, 3, 4);
      const MultiScaleGrid before = generate(g, b);
      for (double& x : b.kernel_2d(1, 0, 1)) x += 0.3;
      if (fam == Family::vm) {
        for (double& x : b.kernel_1d(1, 2, 1)) x -= 0.2;
      }
      const MultiScaleGrid after = generate(g, b);
      CHECK(after[0].planes == before[0].planes);
      for (int a = 0; a < 3; ++a) {
        const std::size_t plane = static_cast<std::size_t>(g.plane_rows(a)) * g.plane_cols(a);
        for (int r = 0; r < 3; ++r) {
          bool same = true;
          for (std::size_t i = 0; i < plane; ++i) {
            same = same && after[1].planes[a][r * plane + i] == before[1].planes[a][r * plane + i];
          }
          CHECK(same == !(a == 0 && r == 1));
        }
        if (fam == Family::vm) {
          const std::size_t n = g.res[a];
          for (int r = 0; r < 3; ++r) {
            bool same = true;
            for (std::size_t i = 0; i < n; ++i) {
              same = same && after[1].vectors[a][r * n + i] == before[1].vectors[a][r * n + i];
            }
            CHECK(same == !(a == 2 && r == 1));
          }
        }
      }
    }
    SUBCASE("linear in the shared grid") {
      const FactorGrid h = random_grid(fam, {5, 6, 4}, 3, 5);
      FactorGrid mix = g;
      mix.fill(0.0);
      mix.axpy(2.0, g);
      mix.axpy(-0.5, h);
      const MipKernelBank b = random_bank(fam, 3, 3, 3, 6);
      const auto ga = generate(g, b), gb = generate(h, b), gm = generate(mix, b);
      for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < 3; ++a) {
          for (std::size_t i = 0; i < gm[s].planes[a].size(); ++i) {
            REQUIRE(gm[s].planes[a][i] ==
                    doctest::Approx(2.0 * ga[s].planes[a][i] - 0.5 * gb[s].planes[a][i]).epsilon(1e-12));
          }
          for (std::size_t i = 0; i < gm[s].vectors[a].size(); ++i) {
            REQUIRE(gm[s].vectors[a][i] ==
                    doctest::Approx(2.0 * ga[s].vectors[a][i] - 0.5 * gb[s].vectors[a][i]).epsilon(1e-12));
          }
        }
      }
    }
    SUBCASE("bank shape must match the grid") {
      CHECK_THROWS_AS(generate(g, MipKernelBank::identity(fam, 2, 2, 3)), std::invalid_argument);
    }
  }
  SUBCASE("family-specific entry points reject the other family") {
    CHECK_THROWS_AS(generate_vm(FactorGrid::zeros(Family::planes, {3, 3, 3}, 1),
                                MipKernelBank::identity(Family::planes, 1, 2, 3)),
                    std::invalid_argument);
  }
}

TEST_CASE("dense 3-D convolution oracle") {
  const std::vector<double> id1{0.0, 1.0, 0.0}, id2{0, 0, 0, 0, 1, 0, 0, 0, 0};
  SUBCASE("identity kernels leave the input unchanged") {
    DenseGrid3D d{{4, 5, 3}, 1, std::vector<double>(60)};
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : d.data) v = u(gen);
    CHECK(dense_conv3d_oracle(d, id1, id2, 1).data == d.data);
  }
  SUBCASE("impulse response is the separable kernel") {
    const std::vector<double> k1{0.2, 0.5, 0.3}, k2{1, 2, 3, 4, 5, 6, 7, 8, 9};
    DenseGrid3D d{{5, 5, 5}, 1, std::vector<double>(125, 0.0)};
    d.at(2, 2, 2, 0) = 1.0;
    const DenseGrid3D out = dense_conv3d_oracle(d, k1, k2, 0);
    // Correlation: output at (2 - (i - 1), ...) picks up k[i].
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          CHECK(out.at(3 - i, 3 - j, 3 - k, 0) == doctest::Approx(k1[i] * k2[j * 3 + k]).epsilon(1e-14));
        }
  }
  SUBCASE("matches a brute-force loop on a 6^3 tensor") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseGrid3D d{{6, 6, 6}, 1, std::vector<double>(216)};
    for (double& v : d.data) v = u(gen);
    std::vector<double> k1(3), k2(9);
    for (double& v : k1) v = u(gen);
    for (double& v : k2) v = u(gen);
    for (int axis = 0; axis < 3; ++axis) {
      const DenseGrid3D out = dense_conv3d_oracle(d, k1, k2, axis);
      const int pa = kPlaneAxes[axis][0], pb = kPlaneAxes[axis][1];
      for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 6; ++y)
          for (int z = 0; z < 6; ++z) {
            double want = 0.0;
            for (int i = 0; i < 3; ++i)
              for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) {
                  int q[3] = {x, y, z};
                  q[axis] += i - 1;
                  q[pa] += j - 1;
                  q[pb] += k - 1;
                  for (int& c : q) c = std::clamp(c, 0, 5);
                  want += k1[i] * k2[j * 3 + k] * d.at(q[0], q[1], q[2], 0);
                }
            REQUIRE(out.at(x, y, z, 0) == doctest::Approx(want).epsilon(1e-13));
          }
    }
  }
  SUBCASE("element budget") {
    DenseGrid3D d{{4, 4, 4}, 1, std::vector<double>(64)};
    CHECK_THROWS(dense_conv3d_oracle(d, id1, id2, 0, 10));
  }
}

TEST_CASE("separability of factor-space convolution") {
  // Convolving the factors of one VM term equals convolving its dense tensor
  // with the outer-product kernel.

  for (int trial = 0; trial < 10; ++trial) {
    FactorGrid g = random_grid(Family::vm, {6, 5, 7}, 2, 100 + trial);
    const MipKernelBank b = random_bank(Family::vm, 2, 2, 3, 200 + trial);
    const int axis = trial % 3;
    for (int a = 0; a < 3; ++a) {
      if (a == axis) continue;
      std::fill(g.vectors[a].begin(), g.vectors[a].end(), 0.0);
    }
    const DenseGrid3D lhs = reconstruct_dense_vm(generate_vm(g, b)[1]);
    const DenseGrid3D dense = reconstruct_dense_vm(g);
    for (int r = 0; r < 2; ++r) {
      DenseGrid3D one{dense.res, 1, {}};
      for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 5; ++y)
          for (int z = 0; z < 7; ++z) one.data.push_back(dense.at(x, y, z, r));
      const DenseGrid3D rhs = dense_conv3d_oracle(one, b.kernel_1d(1, axis, r), b.kernel_2d(1, axis, r), axis);
      for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 5; ++y)
          for (int z = 0; z < 7; ++z) REQUIRE(lhs.at(x, y, z, r) == doctest::Approx(rhs.at(x, y, z, 0)).epsilon(1e-12));
    }
  }
}
