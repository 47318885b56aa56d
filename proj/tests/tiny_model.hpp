// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small fixtures shared by unit and acceptance tests.
#pragma once

#include <cmath>
#include <random>

#include "mipgrid/field.hpp"
#include "mipgrid/render.hpp"

namespace mipgrid::testing {

// Copy of every parameter block, in block order.
inline std::vector<std::vector<double>> flat(const RadianceField& field) {
  RadianceField copy = field;
  std::vector<std::vector<double>> out;
  for (const auto& b : copy.blocks()) out.emplace_back(b.values.begin(), b.values.end());
  return out;
}

inline void randomize(FactorGrid& g, std::mt19937_64& gen, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : g.vectors) {
    for (double& x : v) x = u(gen);
  }
  for (auto& p : g.planes) {
    for (double& x : p) x = u(gen);
  }
}

// Random-but-smooth kernels: a Gaussian bank plus a small perturbation so
// kernel gradients are generic.
inline MipKernelBank tiny_bank(Family family, int rank, int scales, std::mt19937_64& gen) {
  std::vector<double> stdevs;
  for (int s = 0; s < scales; ++s) stdevs.push_back(1.0 + 0.7 * s);
  MipKernelBank bank = init_gaussian(family, rank, scales, 3, stdevs);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (double& k : bank.kernels_1d) k += u(gen);
  for (double& k : bank.kernels_2d) k += u(gen);
  return bank;
}

// 8^3 grids, R = 2, S = 2 (or single-scale when scales == 1).
inline RadianceField tiny_field(Family family, ScaleKind kind, int scales = 2, std::uint64_t seed = 7) {
  std::mt19937_64 gen(seed);
  const Resolution res{8, 8, 8};
  const int rank = 2;
  RadianceField f;
  f.density_grid = FactorGrid::zeros(family, res, rank);
  f.appearance_grid = FactorGrid::zeros(family, res, rank);
  if (family == Family::vm) {
    randomize(f.density_grid, gen, -0.6, 1.0);
    randomize(f.appearance_grid, gen, -1.0, 1.0);
  } else {
    randomize(f.density_grid, gen, 0.3, 1.2);
    randomize(f.appearance_grid, gen, 0.3, 1.2);
  }
  f.decoder = DecoderMLP::zeros(f.appearance_grid.feature_count(), 3, 8);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto* v : {&f.decoder.basis, &f.decoder.w1, &f.decoder.b1, &f.decoder.w2, &f.decoder.b2}) {
    for (double& x : *v) x = n(gen);
  }
  f.density_shift = -1.5;
  f.scale_kind = kind;
  if (scales > 1) {
    f.density_bank = tiny_bank(family, rank, scales, gen);
    f.appearance_bank = tiny_bank(family, rank, scales, gen);
    std::vector<double> anchors;
    const double base = kind == ScaleKind::discrete ? 1e-3 : 4e-3;
    for (int s = 0; s < scales; ++s) anchors.push_back(base * std::exp2(s));
    f.index_map = ScaleIndexMap(anchors);
    if (kind == ScaleKind::two_d) {
      f.density_bank_b = tiny_bank(family, rank, scales, gen);
      f.appearance_bank_b = tiny_bank(family, rank, scales, gen);
      std::vector<double> d;
      for (int s = 0; s < scales; ++s) d.push_back(3.0 + 2.0 * s / std::max(1, scales - 1));
      f.distance_map = ScaleIndexMap(d);
    }
  }
  f.validate();
  return f;
}

// Two rays crossing the box, targets away from the current prediction.
inline RayBatch tiny_batch() {
  RayBatch b;
  Ray r0;
  r0.origin = {0.1, -0.2, 4.0};
  r0.dir = normalized(Vec3{0.08, 0.05, -1.0});
  r0.s_disc = 1.4e-3;
  r0.seed = 11;
  Ray r1;
  r1.origin = {3.0, 1.5, 1.8};
  r1.dir = normalized(Vec3{-3.0, -1.3, -1.9});
  r1.s_disc = 1.7e-3;
  r1.seed = 12;
  b.rays = {r0, r1};
  b.target = {{0.9, 0.2, 0.4}, {0.1, 0.7, 0.3}};
  b.weight = {1.0, 4.0};
  b.scale_id = {0, 1};
  return b;
}

inline RenderSettings tiny_settings() {
  RenderSettings s;
  s.n_samples = 8;
  s.background = {0.0, 0.0, 0.0};
  s.distance_scale = 1.0;
  s.weight_threshold = 0.0;
  return s;
}

}  // namespace mipgrid::testing
