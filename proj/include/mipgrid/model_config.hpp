// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mipgrid/data.hpp"
#include "mipgrid/field.hpp"

namespace mipgrid {

struct ModelConfig {
  Family family = Family::vm;
  // 1 builds the single-scale baseline (no kernel banks).
  int scales = 4;
  int kernel_size = 3;
  int density_rank = 4;
  int appearance_rank = 12;
  int channels = 16;
  int hidden = 64;
  int resolution = 32;  // nodes per axis at initialization
  double box_half = 1.5;
  std::vector<double> stdevs{1.0, 1.5, 2.5, 4.0};
  ScaleKind scale_kind = ScaleKind::discrete;
  // Explicit primary anchors (S values, strictly monotone); empty derives
  // them from the dataset.
  std::vector<double> anchors;
  bool kernels_trainable = true;
  double init_std = 0.1;
  double density_shift = -10.0;

  void validate() const;
};

struct AnchorSet {
  ScaleIndexMap index_map;
  ScaleIndexMap distance_map;
};

// Primary anchors follow the dataset's scale factors (log-spaced between the
// smallest and largest when S differs from the factor count). For the
// continuous kinds they are multiplied by the mean training camera distance
// to the scene center; two_d distance anchors are quantiles of sample
// distances over [near, far].
AnchorSet compute_anchors(const ModelConfig& model, const MultiScaleDataset& dataset);

// Random initialization (normal, init_std) of grids and decoder; Gaussian
// kernel banks.
RadianceField build_field(const ModelConfig& model, const AnchorSet& anchors, std::uint64_t seed);

}  // namespace mipgrid
