// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mipgrid/camera.hpp"
#include "mipgrid/field.hpp"
#include "mipgrid/image.hpp"

namespace mipgrid {

// SplitMix64 stream; small enough to seed one per ray.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  double uniform();  // [0, 1)

 private:
  std::uint64_t state_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
// Per-ray seed from (global seed, image id, pixel id) plus a stream index
// (the training iteration), independent of worker count.
std::uint64_t ray_seed(std::uint64_t global_seed, std::uint64_t image_id, std::uint64_t pixel_id,
                       std::uint64_t stream = 0);

struct Ray {
  Vec3 origin{};
  Vec3 dir{0.0, 0.0, -1.0};  // unit length
  double near = 2.0;
  double far = 6.0;
  double s_disc = 1.0;  // discrete scale of the source image
  std::uint64_t seed = 0;
};

struct Pixel {
  int x = 0;
  int y = 0;
};

struct RayBatch {
  std::vector<Ray> rays;
  std::vector<Vec3> target;    // ground-truth RGB (may be empty when rendering)
  std::vector<double> weight;  // per-ray loss weight (> 0)
  std::vector<int> scale_id;   // index of the source scale, for per-scale stats

  std::size_t size() const { return rays.size(); }
};

// One ray through each pixel center; s_disc = discrete_scale(camera).
// Throws std::out_of_range for pixels outside the image.
RayBatch generate_rays(const CameraModel& camera, std::span<const Pixel> pixels);
Ray pixel_ray(const CameraModel& camera, double s_disc, int px, int py);

struct SamplePoint {
  Vec3 x{};
  double t = 0.0;
  double delta = 0.0;
};

// One draw per equal sub-interval of [near, far]; with rng == nullptr the
// draw is the bin midpoint. Deltas are the spacing to the next sample, the
// last one reaching far.
std::vector<SamplePoint> stratified_samples(const Ray& ray, int n_samples, Rng* rng);
void stratified_samples(const Ray& ray, int n_samples, Rng* rng, std::vector<SamplePoint>& out);

struct CompositeResult {
  Vec3 rgb{};
  double opacity = 0.0;
  std::vector<double> weights;
  std::vector<double> transmittance;
};

// Emission-absorption quadrature.
CompositeResult composite(std::span<const double> sigma, std::span<const Vec3> colors, std::span<const double> delta,
                          const Vec3& background);

struct RenderSettings {
  int n_samples = 128;
  Vec3 background{1.0, 1.0, 1.0};
  // Multiplies segment lengths before compositing.
  double distance_scale = 25.0;
  // Samples whose compositing weight is at or below this threshold skip the
  // appearance branch and take the background color (contributing nothing).
  double weight_threshold = 1e-4;
  // Optional fixed scale-coordinate overrides used by the renderer.
  std::optional<double> scale_override;
  std::optional<double> distance_override;
};

struct RayResult {
  Vec3 rgb{};
  double opacity = 0.0;
};

// Reusable per-worker buffers.
struct RayWorkspace {
  std::vector<SamplePoint> samples;
  std::vector<PointStencil> stencils;
  std::vector<ScaleQuery> queries;
  std::vector<double> pre;
  std::vector<double> sigma;
  std::vector<double> weights;
  std::vector<double> trans_after;
  std::vector<Vec3> colors;
  std::vector<int> colored;
  std::vector<double> app_features;  // colored samples x F
  std::vector<DecoderScratch> decoder;
  std::vector<double> scratch;
  std::vector<double> features;
  std::vector<double> grad_features;
  std::vector<double> grad_hidden_bias;
};

// jitter: stratified draw from the ray's seed; otherwise bin midpoints.
RayResult render_ray(const RadianceField& field, const FieldSnapshot& snapshot, const Ray& ray,
                     const RenderSettings& settings, bool jitter, RayWorkspace& ws);

// Forward pass plus backprop of d(loss)/d(rgb). Accumulates into
// grad_snapshot (generated grids) and grad_field (decoder and density
// shift only; grids and kernels are reached through snapshot_backward).
RayResult render_ray_backward(const RadianceField& field, const FieldSnapshot& snapshot, const Ray& ray,
                              const RenderSettings& settings, bool jitter, const Vec3& grad_rgb,
                              FieldSnapshot& grad_snapshot, RadianceField& grad_field, RayWorkspace& ws);

// Same, with d(loss)/d(rgb) computed from the forward result.
using GradFn = std::function<Vec3(const RayResult&)>;
RayResult render_ray_backward(const RadianceField& field, const FieldSnapshot& snapshot, const Ray& ray,
                              const RenderSettings& settings, bool jitter, const GradFn& grad_of_rgb,
                              FieldSnapshot& grad_snapshot, RadianceField& grad_field, RayWorkspace& ws);

// Deterministic full-image render (bin-midpoint samples).
Image render_image(const RadianceField& field, const CameraModel& camera, const RenderSettings& settings,
                   int threads = 1);
Image render_image(const RadianceField& field, const FieldSnapshot& snapshot, const CameraModel& camera,
                   const RenderSettings& settings, int threads = 1);

}  // namespace mipgrid
