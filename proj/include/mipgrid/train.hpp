// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mipgrid/data.hpp"
#include "mipgrid/field.hpp"
#include "mipgrid/render.hpp"

namespace mipgrid {

struct UpsampleEvent {
  int iteration = 0;
  int resolution = 0;  // nodes per axis
};

struct TrainConfig {
  int iterations = 3000;
  int batch_rays = 1024;
  double lr_grid = 0.02;
  double lr_kernel = 0.001;
  double lr_decoder = 0.001;
  // Learning rates decay exponentially to lr * lr_decay at the last iteration.
  double lr_decay = 0.1;
  std::vector<UpsampleEvent> upsample;
  int kernel_start = 0;
  // Per-pixel loss weight for each dataset scale, in dataset order. Empty
  // means factor^2. Normalized so the mean weight over the ray pool is 1.
  std::vector<double> scale_weights;
  std::uint64_t seed = 0;
  int threads = 1;
  int eval_every = 0;  // 0: evaluate only at the end
  int eval_views = 0;  // 0: all test views
  int log_every = 100;

  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// First and second moments per parameter block; each block keeps its own
// step count so a block can be reset (grid upsampling) independently.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::vector<long> t;

  static AdamState init(RadianceField& field);
  void reset_block(std::size_t block, std::size_t size);
};

struct GroupRates {
  double grid = 0.0;
  double kernel = 0.0;
  double decoder = 0.0;
  double of(BlockGroup g) const {
    return g == BlockGroup::grid ? grid : g == BlockGroup::kernel ? kernel : decoder;
  }
};

// One bias-corrected Adam update of every block whose group rate is
// positive. Blocks with rate 0 are left untouched (moments included).
void adam_step(RadianceField& field, RadianceField& grad, AdamState& state, const GroupRates& rates,
               const AdamConfig& adam = {});

// Mean over rays of weight * |rgb - target|^2.
double loss(const RayBatch& batch, const RadianceField& field, const RenderSettings& settings, bool jitter,
            int threads = 1);
double loss(const RayBatch& batch, const RadianceField& field, const FieldSnapshot& snapshot,
            const RenderSettings& settings, bool jitter, int threads = 1);

struct LossStats {
  double loss = 0.0;
  double mse = 0.0;  // unweighted, per channel
};

// Loss and exact gradients. grad must have the field's shapes; it is
// overwritten. Kernel gradients are only produced when include_kernels is set
// (they stay zero otherwise). Workers process contiguous chunks of the batch
// and their partial gradients are summed in worker order.
LossStats loss_and_gradient(const RayBatch& batch, const RadianceField& field, const RenderSettings& settings,
                            bool jitter, bool include_kernels, RadianceField& grad, int threads = 1);

struct BlockCheck {
  std::string name;
  std::size_t checked = 0;
  double max_abs_analytic = 0.0;
  double max_abs_error = 0.0;
  double rel_error = 0.0;
};

struct GradientReport {
  std::vector<BlockCheck> blocks;
  double tolerance = 1e-4;
  bool pass = false;
  double max_rel_error() const;
};

// Central differences with step h on every entry (or an evenly strided
// subset of at most max_per_block entries). Relative error per block is
// max|a - n| / max(max|a|, max|n|).
GradientReport gradient_check(const RayBatch& batch, const RadianceField& field, const RenderSettings& settings,
                              double h = 1e-5, double tolerance = 1e-4, std::size_t max_per_block = 0);

// Every pixel of every training view of every scale.
struct RayPool {
  std::vector<Ray> rays;
  std::vector<Vec3> target;
  std::vector<double> weight;
  std::vector<int> scale_id;
  std::vector<std::uint32_t> image_id;
  std::vector<std::uint32_t> pixel_id;

  std::size_t size() const { return rays.size(); }
};

RayPool build_ray_pool(const MultiScaleDataset& dataset, std::span<const double> scale_weights);

struct MetricsRow {
  int iteration = 0;
  double loss = 0.0;
  double train_psnr = 0.0;
  std::vector<double> eval_psnr;  // per dataset scale; empty when not evaluated
  double wall_clock_s = 0.0;
};

struct TrainResult {
  RadianceField field;
  std::vector<MetricsRow> metrics;
  std::vector<int> factors;
  std::string rng_state;
  int completed_iterations = 0;
  // Set when training stopped on a non-finite loss or gradient; field then
  // holds the last finite parameters.
  bool aborted = false;
  std::string diagnostic;
};

using ProgressFn = std::function<void(const MetricsRow&)>;

// Grid-only training until kernel_start, grid upsampling at the scheduled
// iterations (grid Adam moments restart), periodic evaluation on the test
// split of every scale.
TrainResult run(const TrainConfig& config, const RadianceField& init, const MultiScaleDataset& dataset,
                const RenderSettings& settings, const ProgressFn& progress = {});

// Test-split PSNR per dataset scale (first max_views views, 0 = all).
std::vector<double> eval_psnr(const RadianceField& field, const MultiScaleDataset& dataset,
                              const RenderSettings& settings, int max_views, int threads);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                       const std::vector<int>& factors);

}  // namespace mipgrid
