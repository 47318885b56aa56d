// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mipgrid/error.hpp"
#include "mipgrid/metrics.hpp"

namespace mipgrid {

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("train.iterations must be >= 0");
  if (batch_rays < 1) throw std::invalid_argument("train.batch_rays must be positive");
  if (!(lr_grid > 0.0) || !(lr_kernel > 0.0) || !(lr_decoder > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw std::invalid_argument("train.lr_decay must lie in (0, 1]");
  int last = 0;
  for (const auto& e : upsample) {
    if (e.iteration < last) throw std::invalid_argument("upsample schedule must be sorted by iteration");
    if (e.resolution < 2) throw std::invalid_argument("upsample resolution must be >= 2");
    last = e.iteration;
  }
  if (kernel_start < last) {
    throw std::invalid_argument("train.kernel_start must not precede the last upsample iteration");
  }
  for (double w : scale_weights) {
    if (!(w > 0.0)) throw std::invalid_argument("scale weights must be positive");
  }
  if (threads < 1) throw std::invalid_argument("train.threads must be positive");
}

AdamState AdamState::init(RadianceField& field) {
  AdamState s;
  for (const auto& b : field.blocks()) {
    s.m.emplace_back(b.values.size(), 0.0);
    s.v.emplace_back(b.values.size(), 0.0);
    s.t.push_back(0);
  }
  return s;
}

void AdamState::reset_block(std::size_t block, std::size_t size) {
  m.at(block).assign(size, 0.0);
  v.at(block).assign(size, 0.0);
  t.at(block) = 0;
}

void adam_step(RadianceField& field, RadianceField& grad, AdamState& state, const GroupRates& rates,
               const AdamConfig& adam) {
  auto params = field.blocks();
  auto grads = grad.blocks();
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("optimizer state does not match the field");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    const double lr = rates.of(params[b].group);
    if (!(lr > 0.0)) continue;
    auto p = params[b].values;
    auto g = grads[b].values;
    auto& m = state.m[b];
    auto& v = state.v[b];
    if (m.size() != p.size() || g.size() != p.size()) {
      throw std::invalid_argument("optimizer state size mismatch in block " + params[b].name);
    }
    const long t = ++state.t[b];
    const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
      v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= lr * mh / (std::sqrt(vh) + adam.eps);
    }
  }
}

namespace {

template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = n * t / threads;
    const std::size_t hi = n * (t + 1) / threads;
    pool.emplace_back([&fn, t, lo, hi] { fn(t, lo, hi); });
  }
  for (auto& th : pool) th.join();
}

void add_into(RadianceField& dst, RadianceField& src) {
  auto d = dst.blocks();
  auto s = src.blocks();
  for (std::size_t b = 0; b < d.size(); ++b) {
    for (std::size_t i = 0; i < d[b].values.size(); ++i) d[b].values[i] += s[b].values[i];
  }
}

void add_into(MultiScaleGrid& dst, const MultiScaleGrid& src) {
  for (std::size_t s = 0; s < dst.size(); ++s) dst[s].axpy(1.0, src[s]);
}

void add_into(FieldSnapshot& dst, const FieldSnapshot& src) {
  add_into(dst.density, src.density);
  add_into(dst.appearance, src.appearance);
  add_into(dst.density_b, src.density_b);
  add_into(dst.appearance_b, src.appearance_b);
}

}  // namespace

double loss(const RayBatch& batch, const RadianceField& field, const FieldSnapshot& snapshot,
            const RenderSettings& settings, bool jitter, int threads) {
  if (batch.size() == 0) throw std::invalid_argument("loss needs a nonempty batch");
  if (batch.target.size() != batch.size() || batch.weight.size() != batch.size()) {
    throw std::invalid_argument("batch targets and weights must match the ray count");
  }
  std::vector<double> partial(std::max(1, threads), 0.0);
  parallel_chunks(batch.size(), threads, [&](int t, std::size_t lo, std::size_t hi) {
    RayWorkspace ws;
    double sum = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      const RayResult res = render_ray(field, snapshot, batch.rays[r], settings, jitter, ws);
      double e = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = res.rgb[c] - batch.target[r][c];
        e += d * d;
      }
      sum += batch.weight[r] * e;
    }
    partial[t] = sum;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  const double value = total / batch.size();
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  return value;
}

double loss(const RayBatch& batch, const RadianceField& field, const RenderSettings& settings, bool jitter,
            int threads) {
  return loss(batch, field, make_snapshot(field), settings, jitter, threads);
}

LossStats loss_and_gradient(const RayBatch& batch, const RadianceField& field, const RenderSettings& settings,
                            bool jitter, bool include_kernels, RadianceField& grad, int threads) {
  if (batch.size() == 0) throw std::invalid_argument("loss needs a nonempty batch");
  if (batch.target.size() != batch.size() || batch.weight.size() != batch.size()) {
    throw std::invalid_argument("batch targets and weights must match the ray count");
  }
  const FieldSnapshot snap = make_snapshot(field);
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
  std::vector<FieldSnapshot> grad_snaps(workers);
  std::vector<RadianceField> grad_fields(workers);
  std::vector<double> loss_part(workers, 0.0);
  std::vector<double> se_part(workers, 0.0);
  const double inv_n = 1.0 / batch.size();

  parallel_chunks(batch.size(), workers, [&](int t, std::size_t lo, std::size_t hi) {
    grad_snaps[t] = zeros_like(snap);
    grad_fields[t] = zeros_like(field);
    RayWorkspace ws;
    double lsum = 0.0;
    double se = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      const std::size_t idx = r;
      auto grad_of = [&](const RayResult& res) {
        Vec3 g{};
        double e = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double d = res.rgb[c] - batch.target[idx][c];
          e += d * d;
          g[c] = 2.0 * batch.weight[idx] * d * inv_n;
        }
        lsum += batch.weight[idx] * e;
        se += e;
        return g;
      };
      render_ray_backward(field, snap, batch.rays[r], settings, jitter, grad_of, grad_snaps[t], grad_fields[t], ws);
    }
    loss_part[t] = lsum;
    se_part[t] = se;
  });

  for (int t = 1; t < workers; ++t) {
    add_into(grad_snaps[0], grad_snaps[t]);
    add_into(grad_fields[0], grad_fields[t]);
  }
  grad = std::move(grad_fields[0]);
  snapshot_backward(field, grad_snaps[0], grad, include_kernels);

  LossStats stats;
  for (int t = 0; t < workers; ++t) {
    stats.loss += loss_part[t];
    stats.mse += se_part[t];
  }
  stats.loss *= inv_n;
  stats.mse *= inv_n / 3.0;
  if (!std::isfinite(stats.loss)) throw NumericError("loss is not finite");
  for (const auto& b : grad.blocks()) {
    for (double v : b.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in block " + b.name);
    }
  }
  return stats;
}

double GradientReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.rel_error);
  return m;
}

GradientReport gradient_check(const RayBatch& batch, const RadianceField& field, const RenderSettings& settings,
                              double h, double tolerance, std::size_t max_per_block) {
  RadianceField grad = zeros_like(field);
  loss_and_gradient(batch, field, settings, true, true, grad, 1);
  RadianceField probe = field;
  auto pblocks = probe.blocks();
  auto gblocks = grad.blocks();
  GradientReport report;
  report.tolerance = tolerance;
  for (std::size_t b = 0; b < pblocks.size(); ++b) {
    auto values = pblocks[b].values;
    if (values.empty()) continue;
    const std::size_t n = values.size();
    const std::size_t stride = (max_per_block == 0 || n <= max_per_block) ? 1 : (n + max_per_block - 1) / max_per_block;
    BlockCheck check;
    check.name = pblocks[b].name;
    double max_num = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      values[i] = saved + h;
      const double lp = loss(batch, probe, settings, true);
      values[i] = saved - h;
      const double lm = loss(batch, probe, settings, true);
      values[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = gblocks[b].values[i];
      check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(analytic));
      max_num = std::max(max_num, std::abs(numeric));
      check.max_abs_error = std::max(check.max_abs_error, std::abs(analytic - numeric));
      ++check.checked;
    }
    const double scale = std::max({check.max_abs_analytic, max_num, 1e-300});
    check.rel_error = check.max_abs_error / scale;
    report.blocks.push_back(check);
  }
  report.pass = !report.blocks.empty();
  for (const auto& c : report.blocks) {
    if (!(c.rel_error < tolerance)) report.pass = false;
  }
  return report;
}

RayPool build_ray_pool(const MultiScaleDataset& dataset, std::span<const double> scale_weights) {
  if (!scale_weights.empty() && scale_weights.size() != dataset.scales.size()) {
    throw std::invalid_argument("need one loss weight per dataset scale");
  }
  RayPool pool;
  std::uint32_t image_id = 0;
  for (std::size_t s = 0; s < dataset.scales.size(); ++s) {
    const auto& scale = dataset.scales[s];
    const double w = scale_weights.empty() ? static_cast<double>(scale.factor) * scale.factor : scale_weights[s];
    for (const View& v : scale.train) {
      const double s_disc = discrete_scale(v.camera);
      for (int y = 0; y < v.camera.height; ++y) {
        for (int x = 0; x < v.camera.width; ++x) {
          pool.rays.push_back(pixel_ray(v.camera, s_disc, x, y));
          pool.target.push_back({v.image.at(x, y, 0), v.image.at(x, y, 1), v.image.at(x, y, 2)});
          pool.weight.push_back(w);
          pool.scale_id.push_back(static_cast<int>(s));
          pool.image_id.push_back(image_id);
          pool.pixel_id.push_back(static_cast<std::uint32_t>(y * v.camera.width + x));
        }
      }
      ++image_id;
    }
  }
  if (pool.size() == 0) throw std::invalid_argument("dataset has no training pixels");
  double mean = 0.0;
  for (double w : pool.weight) mean += w;
  mean /= pool.size();
  for (double& w : pool.weight) w /= mean;
  return pool;
}

std::vector<double> eval_psnr(const RadianceField& field, const MultiScaleDataset& dataset,
                              const RenderSettings& settings, int max_views, int threads) {
  const FieldSnapshot snap = make_snapshot(field);
  std::vector<double> out;
  for (const auto& scale : dataset.scales) {
    const std::size_t n = max_views > 0 ? std::min<std::size_t>(max_views, scale.test.size()) : scale.test.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Image img = render_image(field, snap, scale.test[i].camera, settings, threads);
      sum += psnr(img, scale.test[i].image);
    }
    out.push_back(n > 0 ? sum / n : 0.0);
  }
  return out;
}

TrainResult run(const TrainConfig& config, const RadianceField& init, const MultiScaleDataset& dataset,
                const RenderSettings& settings, const ProgressFn& progress) {
  config.validate();
  init.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  TrainResult result;
  result.field = init;
  for (const auto& s : dataset.scales) result.factors.push_back(s.factor);
  RadianceField& field = result.field;

  const RayPool pool = build_ray_pool(dataset, config.scale_weights);
  std::mt19937_64 sampler(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  AdamState adam = AdamState::init(field);
  RadianceField grad = zeros_like(field);
  RayBatch batch;
  std::size_t next_upsample = 0;
  const bool kernels_learnable =
      field.multiscale() && field.density_bank->trainable && field.appearance_bank->trainable;

  for (int it = 0; it < config.iterations; ++it) {
    while (next_upsample < config.upsample.size() && config.upsample[next_upsample].iteration <= it) {
      const int n = config.upsample[next_upsample].resolution;
      const Resolution res{n, n, n};
      field.density_grid = upsample(field.density_grid, res);
      field.appearance_grid = upsample(field.appearance_grid, res);
      grad = zeros_like(field);
      auto blocks = field.blocks();
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].group == BlockGroup::grid && blocks[b].name != "density_shift") {
          adam.reset_block(b, blocks[b].values.size());
        }
      }
      ++next_upsample;
    }

    batch.rays.resize(config.batch_rays);
    batch.target.resize(config.batch_rays);
    batch.weight.resize(config.batch_rays);
    batch.scale_id.resize(config.batch_rays);
    for (int r = 0; r < config.batch_rays; ++r) {
      const std::size_t k = pick(sampler);
      batch.rays[r] = pool.rays[k];
      batch.rays[r].seed = ray_seed(config.seed, pool.image_id[k], pool.pixel_id[k], static_cast<std::uint64_t>(it));
      batch.target[r] = pool.target[k];
      batch.weight[r] = pool.weight[k];
      batch.scale_id[r] = pool.scale_id[k];
    }

    const bool kernels_on = kernels_learnable && it >= config.kernel_start;
    LossStats stats;
    try {
      stats = loss_and_gradient(batch, field, settings, true, kernels_on, grad, config.threads);
    } catch (const NumericError& e) {
      // Parameters have not been touched yet in this iteration.
      result.aborted = true;
      result.diagnostic = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }

    const double decay = std::pow(config.lr_decay, static_cast<double>(it) / std::max(1, config.iterations));
    GroupRates rates;
    rates.grid = config.lr_grid * decay;
    rates.decoder = config.lr_decoder * decay;
    rates.kernel = kernels_on ? config.lr_kernel * decay : 0.0;
    const RadianceField last_good = field;
    adam_step(field, grad, adam, rates);
    bool finite = true;
    for (const auto& b : field.blocks()) {
      for (double v : b.values) finite = finite && std::isfinite(v);
    }
    if (!finite) {
      field = last_good;
      result.aborted = true;
      result.diagnostic = "iteration " + std::to_string(it) + ": parameters became non-finite";
      break;
    }
    result.completed_iterations = it + 1;

    const bool last = it + 1 == config.iterations;
    const bool do_eval = last || (config.eval_every > 0 && (it + 1) % config.eval_every == 0);
    const bool do_log = do_eval || (config.log_every > 0 && (it + 1) % config.log_every == 0);
    if (do_log) {
      MetricsRow row;
      row.iteration = it + 1;
      row.loss = stats.loss;
      row.train_psnr = psnr_from_mse(stats.mse);
      if (do_eval) row.eval_psnr = eval_psnr(field, dataset, settings, config.eval_views, config.threads);
      row.wall_clock_s = elapsed();
      result.metrics.push_back(row);
      if (progress) progress(row);
    }
  }
  std::ostringstream rng;
  rng << sampler;
  result.rng_state = rng.str();
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                       const std::vector<int>& factors) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,loss,train_psnr";
  for (int f : factors) out << ",eval_psnr_f" << f;
  out << ",wall_clock_s\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.loss << ',' << r.train_psnr;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      out << ',';
      if (i < r.eval_psnr.size()) out << r.eval_psnr[i];
    }
    out << ',' << std::setprecision(4) << r.wall_clock_s << std::setprecision(10) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace mipgrid
