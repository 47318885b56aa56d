// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/model_config.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace mipgrid {

void ModelConfig::validate() const {
  if (scales < 1) throw std::invalid_argument("model.scales must be >= 1");
  if (scales > 1 && static_cast<int>(stdevs.size()) != scales) {
    throw std::invalid_argument("model.stdevs needs " + std::to_string(scales) + " values");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("model.kernel_size must be odd");
  if (density_rank < 1 || appearance_rank < 1) throw std::invalid_argument("ranks must be positive");
  if (channels < 1 || hidden < 1) throw std::invalid_argument("decoder sizes must be positive");
  if (resolution < 2) throw std::invalid_argument("model.resolution must be >= 2");
  if (!(box_half > 0.0)) throw std::invalid_argument("model.box must be positive");
  if (!(init_std > 0.0)) throw std::invalid_argument("model.init_std must be positive");
  if (!anchors.empty() && static_cast<int>(anchors.size()) != scales) {
    throw std::invalid_argument("scale_coord.anchors needs " + std::to_string(scales) + " values");
  }
}

AnchorSet compute_anchors(const ModelConfig& model, const MultiScaleDataset& dataset) {
  AnchorSet out;
  if (model.scales < 2) return out;
  if (dataset.scales.empty() || dataset.base().train.empty()) {
    throw std::invalid_argument("anchors need at least one training view");
  }
  const auto& base = dataset.base();
  const double base_s = discrete_scale(base.train.front().camera) / base.factor;

  double f_lo = base.factor;
  double f_hi = base.factor;
  for (const auto& s : dataset.scales) {
    f_lo = std::min(f_lo, static_cast<double>(s.factor));
    f_hi = std::max(f_hi, static_cast<double>(s.factor));
  }
  if (f_hi <= f_lo) f_hi = f_lo * std::exp2(model.scales - 1);
  std::vector<double> factors(model.scales);
  for (int i = 0; i < model.scales; ++i) {
    factors[i] = f_lo * std::pow(f_hi / f_lo, static_cast<double>(i) / (model.scales - 1));
  }

  double t_ref = 1.0;
  if (model.scale_kind != ScaleKind::discrete) {
    double sum = 0.0;
    for (const auto& v : base.train) sum += norm(v.camera.origin());
    t_ref = sum / base.train.size();
  }
  out.index_map = model.anchors.empty() ? default_anchors(base_s * t_ref, factors) : ScaleIndexMap(model.anchors);

  if (model.scale_kind == ScaleKind::two_d) {
    const auto& cam = base.train.front().camera;
    std::vector<double> t(256);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = cam.near + (cam.far - cam.near) * (i + 0.5) / t.size();
    out.distance_map = quantile_anchors(std::move(t), model.scales);
  }
  return out;
}

RadianceField build_field(const ModelConfig& model, const AnchorSet& anchors, std::uint64_t seed) {
  model.validate();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, model.init_std);
  std::uniform_real_distribution<double> uniform(0.1, 0.5);

  const Resolution res{model.resolution, model.resolution, model.resolution};
  RadianceField f;
  f.density_grid = FactorGrid::zeros(model.family, res, model.density_rank);
  f.appearance_grid = FactorGrid::zeros(model.family, res, model.appearance_rank);
  for (FactorGrid* g : {&f.density_grid, &f.appearance_grid}) {
    for (auto& v : g->vectors) {
      for (double& x : v) x = normal(gen);
    }
    for (auto& p : g->planes) {
      // Plane products need positive, O(1) factors to start from a
      // non-degenerate field.
      for (double& x : p) x = model.family == Family::planes ? uniform(gen) : normal(gen);
    }
  }

  const int feat = f.appearance_grid.feature_count();
  f.decoder = DecoderMLP::zeros(feat, model.channels, model.hidden);
  std::normal_distribution<double> basis_init(0.0, 1.0 / std::sqrt(static_cast<double>(feat)));
  for (double& x : f.decoder.basis) x = basis_init(gen);
  std::normal_distribution<double> w1_init(0.0, std::sqrt(2.0 / f.decoder.input_size()));
  for (double& x : f.decoder.w1) x = w1_init(gen);
  std::normal_distribution<double> w2_init(0.0, std::sqrt(1.0 / model.hidden));
  for (double& x : f.decoder.w2) x = w2_init(gen);

  f.density_shift = model.density_shift;
  f.scale_kind = model.scale_kind;
  f.box.min = {-model.box_half, -model.box_half, -model.box_half};
  f.box.max = {model.box_half, model.box_half, model.box_half};

  if (model.scales > 1) {
    auto bank = [&](int rank) {
      MipKernelBank b = init_gaussian(model.family, rank, model.scales, model.kernel_size, model.stdevs);
      b.trainable = model.kernels_trainable;
      return b;
    };
    f.density_bank = bank(model.density_rank);
    f.appearance_bank = bank(model.appearance_rank);
    if (model.scale_kind == ScaleKind::two_d) {
      f.density_bank_b = bank(model.density_rank);
      f.appearance_bank_b = bank(model.appearance_rank);
    }
    f.index_map = anchors.index_map;
    f.distance_map = anchors.distance_map;
  }
  f.validate();
  return f;
}

}  // namespace mipgrid
