// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace mipgrid {

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  Rng r(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
  return r.next_u64();
}

std::uint64_t ray_seed(std::uint64_t global_seed, std::uint64_t image_id, std::uint64_t pixel_id,
                       std::uint64_t stream) {
  return mix_seed(mix_seed(mix_seed(global_seed, image_id), pixel_id), stream);
}

Ray pixel_ray(const CameraModel& cam, double s_disc, int px, int py) {
  const Vec3 d_cam = {(px + 0.5 - cam.cx) / cam.focal_x, -(py + 0.5 - cam.cy) / cam.focal_y, -1.0};
  const Mat4& m = cam.camera_to_world;
  const Vec3 d_world = {m[0] * d_cam[0] + m[1] * d_cam[1] + m[2] * d_cam[2],
                        m[4] * d_cam[0] + m[5] * d_cam[1] + m[6] * d_cam[2],
                        m[8] * d_cam[0] + m[9] * d_cam[1] + m[10] * d_cam[2]};
  Ray ray;
  ray.origin = cam.origin();
  ray.dir = normalized(d_world);
  ray.near = cam.near;
  ray.far = cam.far;
  ray.s_disc = s_disc;
  return ray;
}

RayBatch generate_rays(const CameraModel& camera, std::span<const Pixel> pixels) {
  camera.validate();
  const double s_disc = discrete_scale(camera);
  RayBatch batch;
  batch.rays.reserve(pixels.size());
  for (const Pixel& p : pixels) {
    if (p.x < 0 || p.y < 0 || p.x >= camera.width || p.y >= camera.height) {
      throw std::out_of_range("pixel (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                              ") is outside the image");
    }
    batch.rays.push_back(pixel_ray(camera, s_disc, p.x, p.y));
  }
  batch.weight.assign(pixels.size(), 1.0);
  batch.scale_id.assign(pixels.size(), 0);
  return batch;
}

void stratified_samples(const Ray& ray, int n, Rng* rng, std::vector<SamplePoint>& out) {
  if (n < 2) throw std::invalid_argument("need at least two samples per ray");
  out.resize(n);
  const double bin = (ray.far - ray.near) / n;
  for (int i = 0; i < n; ++i) {
    const double u = rng ? rng->uniform() : 0.5;
    out[i].t = ray.near + (i + u) * bin;
  }
  for (int i = 0; i < n; ++i) {
    out[i].delta = (i + 1 < n ? out[i + 1].t : ray.far) - out[i].t;
    out[i].x = ray.origin + out[i].t * ray.dir;
  }
}

std::vector<SamplePoint> stratified_samples(const Ray& ray, int n, Rng* rng) {
  std::vector<SamplePoint> out;
  stratified_samples(ray, n, rng, out);
  return out;
}

CompositeResult composite(std::span<const double> sigma, std::span<const Vec3> colors, std::span<const double> delta,
                          const Vec3& background) {
  const std::size_t n = sigma.size();
  if (colors.size() != n || delta.size() != n) throw std::invalid_argument("composite inputs differ in length");
  CompositeResult res;
  res.weights.resize(n);
  res.transmittance.resize(n);
  double log_t = 0.0;
  double sum_w = 0.0;
  Vec3 acc{};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::exp(log_t);
    const double tau = sigma[i] * delta[i];
    const double w = t * -std::expm1(-tau);
    res.transmittance[i] = t;
    res.weights[i] = w;
    sum_w += w;
    for (int c = 0; c < 3; ++c) acc[c] += w * colors[i][c];
    log_t -= tau;
  }
  for (int c = 0; c < 3; ++c) res.rgb[c] = acc[c] + (1.0 - sum_w) * background[c];
  res.opacity = sum_w;
  return res;
}

namespace {

void forward_ray(const RadianceField& field, const FieldSnapshot& snap, const Ray& ray, const RenderSettings& rs,
                 bool jitter, RayWorkspace& ws, RayResult& result) {
  Rng rng(ray.seed);
  stratified_samples(ray, rs.n_samples, jitter ? &rng : nullptr, ws.samples);
  const int n = rs.n_samples;
  const bool two = field.density_bank_b.has_value();
  const int fd = field.density_grid.feature_count();
  const int fa = field.appearance_grid.feature_count();
  const bool same_res = field.density_grid.res == field.appearance_grid.res;
  ws.stencils.resize(static_cast<std::size_t>(2) * n);
  ws.queries.resize(n);
  ws.pre.resize(n);
  ws.sigma.resize(n);
  ws.weights.resize(n);
  ws.trans_after.resize(n);
  ws.colors.resize(n);
  ws.features.resize(std::max(fd, fa));
  ws.scratch.resize(2 * static_cast<std::size_t>(std::max(fd, fa)));
  const double s_disc = rs.scale_override.value_or(ray.s_disc);

  for (int i = 0; i < n; ++i) {
    const SamplePoint& sp = ws.samples[i];
    const Vec3 p = field.box.normalize(sp.x);
    ws.stencils[2 * i] = make_stencil(field.density_grid.res, p);
    ws.stencils[2 * i + 1] = same_res ? ws.stencils[2 * i] : make_stencil(field.appearance_grid.res, p);
    ScaleQuery q = scale_query(field, s_disc, sp.t);
    if (rs.distance_override && field.scale_kind == ScaleKind::two_d && field.multiscale()) {
      q.index_b = field.distance_map.index(*rs.distance_override);
    }
    ws.queries[i] = q;
    std::span<double> feat(ws.features.data(), fd);
    field_features(snap.density, snap.density_b, two, ws.stencils[2 * i], q, feat, ws.scratch);
    double sum = field.density_shift;
    for (double v : feat) sum += v;
    ws.pre[i] = sum;
    ws.sigma[i] = softplus(sum);
  }

  double log_t = 0.0;
  ws.colored.clear();
  for (int i = 0; i < n; ++i) {
    const double tau = ws.sigma[i] * ws.samples[i].delta * rs.distance_scale;
    const double t = std::exp(log_t);
    log_t -= tau;
    ws.weights[i] = t * -std::expm1(-tau);
    ws.trans_after[i] = std::exp(log_t);
    if (ws.weights[i] > rs.weight_threshold) ws.colored.push_back(i);
  }

  const std::size_t nc = ws.colored.size();
  ws.app_features.resize(nc * fa);
  if (ws.decoder.size() < nc) ws.decoder.resize(nc);
  Vec3 acc{};
  double sum_w = 0.0;
  for (int i = 0; i < n; ++i) sum_w += ws.weights[i];
  if (nc > 0) {
    const DirectionTerm dir = decoder_direction_term(field.decoder, ray.dir);
    for (std::size_t k = 0; k < nc; ++k) {
      const int i = ws.colored[k];
      std::span<double> feat(ws.app_features.data() + k * fa, fa);
      field_features(snap.appearance, snap.appearance_b, two, ws.stencils[2 * i + 1], ws.queries[i], feat,
                     ws.scratch);
      ws.colors[i] = decoder_forward(field.decoder, dir, feat, ws.decoder[k]);
    }
  }
  // Skipped samples take the background color, so only colored ones add
  // w * (c - bg) on top of the background.
  for (std::size_t k = 0; k < nc; ++k) {
    const int i = ws.colored[k];
    for (int c = 0; c < 3; ++c) acc[c] += ws.weights[i] * (ws.colors[i][c] - rs.background[c]);
  }
  for (int c = 0; c < 3; ++c) result.rgb[c] = rs.background[c] + acc[c];
  result.opacity = sum_w;
}

}  // namespace

RayResult render_ray(const RadianceField& field, const FieldSnapshot& snapshot, const Ray& ray,
                     const RenderSettings& settings, bool jitter, RayWorkspace& ws) {
  RayResult result;
  forward_ray(field, snapshot, ray, settings, jitter, ws, result);
  return result;
}

namespace {

void backward_ray(const RadianceField& field, const FieldSnapshot& snap, const Ray& ray, const RenderSettings& rs,
                  const Vec3& g, FieldSnapshot& grad_snap, RadianceField& grad_field, RayWorkspace& ws) {
  const int n = rs.n_samples;
  const bool two = field.density_bank_b.has_value();
  const int fd = field.density_grid.feature_count();
  const int fa = field.appearance_grid.feature_count();
  const std::size_t nc = ws.colored.size();

  // Appearance branch.
  if (nc > 0) {
    const DirectionTerm dir = decoder_direction_term(field.decoder, ray.dir);
    ws.grad_hidden_bias.assign(field.decoder.hidden, 0.0);
    ws.grad_features.resize(std::max(fd, fa));
    for (std::size_t k = 0; k < nc; ++k) {
      const int i = ws.colored[k];
      const double w = ws.weights[i];
      const Vec3 gc = {w * g[0], w * g[1], w * g[2]};
      std::span<const double> feat(ws.app_features.data() + k * fa, fa);
      std::span<double> gf(ws.grad_features.data(), fa);
      decoder_backward(field.decoder, feat, ws.decoder[k], gc, grad_field.decoder, ws.grad_hidden_bias, gf);
      field_features_backward(snap.appearance, snap.appearance_b, two, ws.stencils[2 * i + 1], ws.queries[i], gf,
                              grad_snap.appearance, grad_snap.appearance_b, ws.scratch);
    }
    decoder_direction_backward(field.decoder, dir, ws.grad_hidden_bias, grad_field.decoder);
  }

  // Density branch. With tau_k = sigma_k * delta_k and e_i = c_i - bg,
  // dL/dtau_k = g . (T_{k+1} e_k - sum_{i>k} w_i e_i).
  thread_local std::vector<double> g_dot_e;
  g_dot_e.assign(n, 0.0);
  for (std::size_t k = 0; k < nc; ++k) {
    const int i = ws.colored[k];
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += g[c] * (ws.colors[i][c] - rs.background[c]);
    g_dot_e[i] = s;
  }
  ws.grad_features.resize(std::max(fd, fa));
  double suffix = 0.0;  // sum_{i>k} w_i (g . e_i)
  for (int k = n - 1; k >= 0; --k) {
    const double d_tau = ws.trans_after[k] * g_dot_e[k] - suffix;
    suffix += ws.weights[k] * g_dot_e[k];
    const double d_pre = d_tau * ws.samples[k].delta * rs.distance_scale * sigmoid(ws.pre[k]);
    if (d_pre == 0.0) continue;
    grad_field.density_shift += d_pre;
    std::span<double> gf(ws.grad_features.data(), fd);
    std::fill(gf.begin(), gf.end(), d_pre);
    field_features_backward(snap.density, snap.density_b, two, ws.stencils[2 * k], ws.queries[k], gf,
                            grad_snap.density, grad_snap.density_b, ws.scratch);
  }
}

}  // namespace

RayResult render_ray_backward(const RadianceField& field, const FieldSnapshot& snap, const Ray& ray,
                              const RenderSettings& rs, bool jitter, const Vec3& grad_rgb, FieldSnapshot& grad_snap,
                              RadianceField& grad_field, RayWorkspace& ws) {
  RayResult result;
  forward_ray(field, snap, ray, rs, jitter, ws, result);
  backward_ray(field, snap, ray, rs, grad_rgb, grad_snap, grad_field, ws);
  return result;
}

RayResult render_ray_backward(const RadianceField& field, const FieldSnapshot& snap, const Ray& ray,
                              const RenderSettings& rs, bool jitter, const GradFn& grad_of_rgb,
                              FieldSnapshot& grad_snap, RadianceField& grad_field, RayWorkspace& ws) {
  RayResult result;
  forward_ray(field, snap, ray, rs, jitter, ws, result);
  const Vec3 g = grad_of_rgb(result);
  backward_ray(field, snap, ray, rs, g, grad_snap, grad_field, ws);
  return result;
}

Image render_image(const RadianceField& field, const FieldSnapshot& snapshot, const CameraModel& camera,
                   const RenderSettings& settings, int threads) {
  camera.validate();
  const double s_disc = discrete_scale(camera);
  Image image = Image::filled(camera.width, camera.height, 3, 0.0f);
  auto work = [&](int row_begin, int row_step) {
    RayWorkspace ws;
    for (int y = row_begin; y < camera.height; y += row_step) {
      for (int x = 0; x < camera.width; ++x) {
        const Ray ray = pixel_ray(camera, s_disc, x, y);
        const RayResult r = render_ray(field, snapshot, ray, settings, false, ws);
        for (int c = 0; c < 3; ++c) image.at(x, y, c) = static_cast<float>(r.rgb[c]);
      }
    }
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  return image;
}

Image render_image(const RadianceField& field, const CameraModel& camera, const RenderSettings& settings,
                   int threads) {
  return render_image(field, make_snapshot(field), camera, settings, threads);
}

}  // namespace mipgrid
