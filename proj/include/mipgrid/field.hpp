// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mipgrid/camera.hpp"
#include "mipgrid/grid.hpp"
#include "mipgrid/mipgen.hpp"
#include "mipgrid/scalecoord.hpp"

namespace mipgrid {

// View direction encoding: d itself plus sin/cos at frequencies 1 and 2.
inline constexpr int kDirOctaves = 2;
inline constexpr int kDirEncodingSize = 3 + 3 * 2 * kDirOctaves;

void encode_direction(const Vec3& d, std::span<double> out);

// Appearance decoder. Features are first mapped to `channels` values by the
// learned basis, concatenated with the direction encoding, then one ReLU
// hidden layer and a logistic RGB output.
struct DecoderMLP {
  int feature_count = 1;
  int channels = 1;
  int hidden = 64;
  std::vector<double> basis;  // [channels][feature_count]
  std::vector<double> w1;     // [hidden][channels + kDirEncodingSize]
  std::vector<double> b1;     // [hidden]
  std::vector<double> w2;     // [3][hidden]
  std::vector<double> b2;     // [3]

  static DecoderMLP zeros(int feature_count, int channels, int hidden);
  int input_size() const { return channels + kDirEncodingSize; }
  bool same_shape(const DecoderMLP& other) const;
};

// Per-ray part of the first layer: W1[:, dir] * enc(d) + b1.
struct DirectionTerm {
  std::vector<double> encoding;
  std::vector<double> hidden_bias;
};

DirectionTerm decoder_direction_term(const DecoderMLP& mlp, const Vec3& dir);

struct DecoderScratch {
  std::vector<double> channels;
  std::vector<double> hidden_pre;
  Vec3 rgb{};
};

Vec3 decoder_forward(const DecoderMLP& mlp, const DirectionTerm& dir, std::span<const double> features,
                     DecoderScratch& scratch);

// Backprop of d(loss)/d(rgb). Accumulates into grad (basis, w1 feature
// columns, w2, b2), into grad_hidden_bias (summed over a ray and flushed by
// decoder_direction_backward), and overwrites grad_features.
void decoder_backward(const DecoderMLP& mlp, std::span<const double> features, const DecoderScratch& scratch,
                      const Vec3& grad_rgb, DecoderMLP& grad, std::span<double> grad_hidden_bias,
                      std::span<double> grad_features);

void decoder_direction_backward(const DecoderMLP& mlp, const DirectionTerm& dir,
                                std::span<const double> grad_hidden_bias, DecoderMLP& grad);

// Axis-aligned scene bounds mapped onto the grid's [-1, 1]^3.
struct SceneBox {
  Vec3 min{-1.5, -1.5, -1.5};
  Vec3 max{1.5, 1.5, 1.5};
  Vec3 normalize(const Vec3& x) const {
    return {2.0 * (x[0] - min[0]) / (max[0] - min[0]) - 1.0, 2.0 * (x[1] - min[1]) / (max[1] - min[1]) - 1.0,
            2.0 * (x[2] - min[2]) / (max[2] - min[2]) - 1.0};
  }
};

enum class BlockGroup { grid, kernel, decoder };

struct ParamBlock {
  std::string name;
  std::span<double> values;
  std::vector<std::size_t> shape;
  BlockGroup group = BlockGroup::grid;
};

// Density and appearance grids, their kernel banks and the decoder.
//
// Without kernel banks the field is single-scale: features come straight from
// the shared grids and the scale coordinate is ignored. With the two_d scale
// coordinate each grid carries a second bank indexed by ray distance.
struct RadianceField {
  FactorGrid density_grid;
  FactorGrid appearance_grid;
  std::optional<MipKernelBank> density_bank;
  std::optional<MipKernelBank> appearance_bank;
  std::optional<MipKernelBank> density_bank_b;
  std::optional<MipKernelBank> appearance_bank_b;
  DecoderMLP decoder;
  double density_shift = -10.0;
  ScaleKind scale_kind = ScaleKind::discrete;
  ScaleIndexMap index_map;
  ScaleIndexMap distance_map;  // two_d only
  SceneBox box;

  bool multiscale() const { return density_bank.has_value(); }
  int scales() const { return multiscale() ? density_bank->scales : 1; }

  // Every trainable array, in a fixed order. Names are stable and used by
  // the checkpoint format.
  std::vector<ParamBlock> blocks();
  std::size_t parameter_count();

  void validate() const;
};

// Same structure and shapes, all zeros (used for gradients).
RadianceField zeros_like(const RadianceField& field);

// Multi-scale grids generated from the current parameters.
struct FieldSnapshot {
  MultiScaleGrid density;
  MultiScaleGrid appearance;
  MultiScaleGrid density_b;
  MultiScaleGrid appearance_b;
};

FieldSnapshot make_snapshot(const RadianceField& field);
FieldSnapshot zeros_like(const FieldSnapshot& snapshot);
void fill_zero(FieldSnapshot& snapshot);

// Pulls snapshot gradients back onto the shared grids, and onto the kernel
// banks when include_kernels is set.
void snapshot_backward(const RadianceField& field, const FieldSnapshot& grad_snapshot, RadianceField& grad_field,
                       bool include_kernels);

// Fractional scale indices of one sample.
struct ScaleQuery {
  double index = 0.0;
  double index_b = 0.0;
};

ScaleQuery scale_query(const RadianceField& field, double s_disc, double t);
ScaleQuery scale_query(const RadianceField& field, const ScaleCoordinate& coord);

// Samples scales floor(idx) and ceil(idx) and blends them linearly.
void extract_blended(const MultiScaleGrid& grids, const PointStencil& stencil, double idx, std::span<double> out,
                     std::span<double> scratch);
void extract_blended_backward(const MultiScaleGrid& grids, const PointStencil& stencil, double idx,
                              std::span<const double> grad_out, MultiScaleGrid& grad_grids);

// Scale-blended features of one grid family member; the two_d form averages
// the two banks.
void field_features(const MultiScaleGrid& a, const MultiScaleGrid& b, bool two_banks, const PointStencil& stencil,
                    const ScaleQuery& q, std::span<double> out, std::span<double> scratch);
void field_features_backward(const MultiScaleGrid& a, const MultiScaleGrid& b, bool two_banks,
                             const PointStencil& stencil, const ScaleQuery& q, std::span<const double> grad_out,
                             MultiScaleGrid& grad_a, MultiScaleGrid& grad_b, std::span<double> scratch);

double softplus(double x);
double sigmoid(double x);

// Convenience, non-batched evaluation (tests, probes). p is a normalized grid
// coordinate; x is a world position.
std::vector<double> extract_scaled(const FactorGrid& grid, const MipKernelBank& bank, const Vec3& p, double idx);
std::vector<double> extract_2d(const RadianceField& field, const Vec3& p, const ScaleCoordinate& coord);
double density(const RadianceField& field, const Vec3& x, const ScaleCoordinate& coord);
Vec3 color(const RadianceField& field, const Vec3& x, const Vec3& d, const ScaleCoordinate& coord);

}  // namespace mipgrid
