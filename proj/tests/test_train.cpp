// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mipgrid/error.hpp"
#include "mipgrid/model_config.hpp"
#include "mipgrid/train.hpp"
#include "tiny_model.hpp"

using namespace mipgrid;
using mipgrid::testing::tiny_batch;
using mipgrid::testing::tiny_field;
using mipgrid::testing::tiny_settings;

TEST_CASE("loss arithmetic") {
  RadianceField f = tiny_field(Family::vm, ScaleKind::discrete);
  RenderSettings rs = tiny_settings();
  RayBatch b = tiny_batch();
  b.rays.resize(1);
  b.weight = {1.0};
  b.scale_id = {0};
  RayWorkspace ws;
  const RayResult pred = render_ray(f, make_snapshot(f), b.rays[0], rs, true, ws);

  SUBCASE("perfect prediction gives zero") {
    b.target = {pred.rgb};
    CHECK(loss(b, f, rs, true) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("residual (0.1, 0, 0) with weight 1 gives 0.01") {
    b.target = {{pred.rgb[0] - 0.1, pred.rgb[1], pred.rgb[2]}};
    CHECK(loss(b, f, rs, true) == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("a weight-4 ray contributes four times a weight-1 ray") {
    b.rays = {b.rays[0], b.rays[0]};
    b.target = {{pred.rgb[0] - 0.1, pred.rgb[1], pred.rgb[2]}, {pred.rgb[0] - 0.1, pred.rgb[1], pred.rgb[2]}};
    b.weight = {1.0, 4.0};
    b.scale_id = {0, 1};
    CHECK(loss(b, f, rs, true) == doctest::Approx((0.01 + 0.04) / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("zero residual gives zero gradients everywhere") {
  RadianceField f = tiny_field(Family::vm, ScaleKind::discrete);
  RenderSettings rs = tiny_settings();
  RayBatch b = tiny_batch();
  RayWorkspace ws;
  const FieldSnapshot snap = make_snapshot(f);
  for (std::size_t i = 0; i < b.size(); ++i) b.target[i] = render_ray(f, snap, b.rays[i], rs, true, ws).rgb;
  RadianceField g = zeros_like(f);
  loss_and_gradient(b, f, rs, true, true, g);
  for (const auto& blk : g.blocks()) {
    for (double v : blk.values) REQUIRE(v == 0.0);
  }
}

TEST_CASE("frozen kernels receive no gradient") {
  RadianceField f = tiny_field(Family::vm, ScaleKind::discrete);
  RadianceField g = zeros_like(f);
  loss_and_gradient(tiny_batch(), f, tiny_settings(), true, false, g);
  double grid_norm = 0.0;
  for (const auto& blk : g.blocks()) {
    for (double v : blk.values) {
      if (blk.group == BlockGroup::kernel) REQUIRE(v == 0.0);
      if (blk.group == BlockGroup::grid) grid_norm += std::abs(v);
    }
  }
  CHECK(grid_norm > 0.0);
}

TEST_CASE("analytic gradients match central differences on the tiny model") {
  for (Family family : {Family::vm, Family::planes}) {
    for (ScaleKind kind : {ScaleKind::discrete, ScaleKind::continuous, ScaleKind::two_d}) {
      CAPTURE(to_string(family));
      CAPTURE(to_string(kind));
      const RadianceField f = tiny_field(family, kind);
      const GradientReport rep = gradient_check(tiny_batch(), f, tiny_settings(), 1e-5, 1e-4);
      for (const auto& blk : rep.blocks) {
        CAPTURE(blk.name);
        CHECK(blk.max_abs_analytic > 0.0);
        CHECK(blk.rel_error < 1e-4);
      }
      CHECK(rep.pass);
    }
  }
}

TEST_CASE("single-scale baseline gradients match central differences") {
  const RadianceField f = tiny_field(Family::vm, ScaleKind::discrete, 1);
  const GradientReport rep = gradient_check(tiny_batch(), f, tiny_settings(), 1e-5, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_error() < 1e-4);
}

TEST_CASE("gradients with the colour-skip threshold and distance scaling") {
  RadianceField f = tiny_field(Family::planes, ScaleKind::discrete);
  RenderSettings rs = tiny_settings();
  rs.distance_scale = 25.0;
  rs.background = {1.0, 1.0, 1.0};
  rs.weight_threshold = 1e-4;
  const GradientReport rep = gradient_check(tiny_batch(), f, rs, 1e-5, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("worker count changes only the reduction, not the result beyond rounding") {
  const RadianceField f = tiny_field(Family::vm, ScaleKind::continuous);
  RayBatch b = tiny_batch();
  RadianceField g1 = zeros_like(f);
  RadianceField g2 = zeros_like(f);
  const LossStats s1 = loss_and_gradient(b, f, tiny_settings(), true, true, g1, 1);
  const LossStats s2 = loss_and_gradient(b, f, tiny_settings(), true, true, g2, 2);
  CHECK(s1.loss == doctest::Approx(s2.loss).epsilon(1e-14));
  auto a = g1.blocks();
  auto c = g2.blocks();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].values.size(); ++j) {
      REQUIRE(a[i].values[j] == doctest::Approx(c[i].values[j]).epsilon(1e-12).scale(1e-12));
    }
  }
}

TEST_CASE("adam closed forms") {
  RadianceField f = tiny_field(Family::vm, ScaleKind::discrete);
  const RadianceField before = f;
  RadianceField g = zeros_like(f);
  AdamState st = AdamState::init(f);
  GroupRates rates{0.01, 0.01, 0.01};

  SUBCASE("zero gradient from a fresh state leaves parameters unchanged") {
    adam_step(f, g, st, rates);
    auto a = f.blocks();
    const auto b = mipgrid::testing::flat(before);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a[i].values.size(); ++j) REQUIRE(a[i].values[j] == b[i][j]);
    }
  }
  SUBCASE("first step moves by -lr * g / (|g| + eps)") {
    auto gb = g.blocks();
    for (auto& blk : gb) {
      for (std::size_t j = 0; j < blk.values.size(); ++j) blk.values[j] = (j % 3 == 0 ? -1.0 : 0.5) * 1e-3;
    }
    adam_step(f, g, st, rates);
    auto a = f.blocks();
    const auto b = mipgrid::testing::flat(before);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a[i].values.size(); ++j) {
        const double gj = gb[i].values[j];
        const double expect = b[i][j] - 0.01 * gj / (std::abs(gj) + 1e-8);
        REQUIRE(a[i].values[j] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
  SUBCASE("second step follows the recurrence") {
    auto gb = g.blocks();
    for (auto& blk : gb) std::fill(blk.values.begin(), blk.values.end(), 0.2);
    adam_step(f, g, st, rates);
    for (auto& blk : gb) std::fill(blk.values.begin(), blk.values.end(), -0.1);
    const double p1 = f.blocks()[0].values[0];
    adam_step(f, g, st, rates);
    const double m = 0.9 * (0.1 * 0.2) + 0.1 * -0.1;
    const double v = 0.99 * (0.01 * 0.04) + 0.01 * 0.01;
    const double mh = m / (1 - 0.81);
    const double vh = v / (1 - 0.99 * 0.99);
    CHECK(f.blocks()[0].values[0] == doctest::Approx(p1 - 0.01 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("zero group rate freezes a block and its moments") {
    auto gb = g.blocks();
    for (auto& blk : gb) std::fill(blk.values.begin(), blk.values.end(), 0.3);
    adam_step(f, g, st, GroupRates{0.01, 0.0, 0.01});
    auto a = f.blocks();
    const auto b = mipgrid::testing::flat(before);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].group != BlockGroup::kernel) continue;
      CHECK(st.t[i] == 0);
      for (std::size_t j = 0; j < a[i].values.size(); ++j) REQUIRE(a[i].values[j] == b[i][j]);
    }
  }
}

namespace {

ProceduralDatasetSpec small_spec() {
  ProceduralDatasetSpec spec;
  spec.scene.width = 16;
  spec.scene.height = 16;
  spec.scene.supersample = 2;
  spec.n_train = 3;
  spec.n_test = 1;
  spec.factors = {1, 2};
  return spec;
}

MultiScaleDataset small_dataset() {
  const MultiScaleDataset base = make_procedural_base(small_spec(), {0.0, 0.0, 0.0});
  const std::vector<int> factors{1, 2, 4};
  return make_multiscale(base, factors);
}

ModelConfig small_model() {
  ModelConfig m;
  m.resolution = 6;
  m.density_rank = 2;
  m.appearance_rank = 2;
  m.channels = 4;
  m.hidden = 8;
  m.scales = 3;
  m.stdevs = {1.0, 1.5, 2.5};
  return m;
}

RenderSettings small_render() {
  RenderSettings rs;
  rs.n_samples = 12;
  rs.background = {0.0, 0.0, 0.0};
  return rs;
}

}  // namespace

TEST_CASE("ray pool weights balance the scales") {
  const MultiScaleDataset ds = small_dataset();
  const RayPool pool = build_ray_pool(ds, {});
  std::vector<double> total(ds.scales.size(), 0.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    total[pool.scale_id[i]] += pool.weight[i];
    mean += pool.weight[i];
  }
  CHECK(mean / pool.size() == doctest::Approx(1.0).epsilon(1e-12));
  for (double t : total) CHECK(t == doctest::Approx(total[0]).epsilon(0.01));
  // factor 2 pixels weigh 4x factor 1 pixels
  CHECK(pool.weight[pool.size() - 1] / pool.weight[0] == doctest::Approx(16.0));
}

TEST_CASE("train config ordering constraint") {
  TrainConfig c;
  c.upsample = {{100, 16}};
  c.kernel_start = 50;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.kernel_start = 100;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("run: zero iterations returns the initialization") {
  const MultiScaleDataset ds = small_dataset();
  const ModelConfig m = small_model();
  const RadianceField init = build_field(m, compute_anchors(m, ds), 3);
  TrainConfig tc;
  tc.iterations = 0;
  const TrainResult res = run(tc, init, ds, small_render());
  CHECK(mipgrid::testing::flat(res.field) == mipgrid::testing::flat(init));
  CHECK(res.metrics.empty());
}

TEST_CASE("run: fixed seed is bit-reproducible and kernels stay frozen before kernel_start") {
  const MultiScaleDataset ds = small_dataset();
  const ModelConfig m = small_model();
  const RadianceField init = build_field(m, compute_anchors(m, ds), 3);
  TrainConfig tc;
  tc.iterations = 12;
  tc.batch_rays = 64;
  tc.upsample = {{4, 8}};
  tc.kernel_start = 20;
  tc.log_every = 4;
  tc.seed = 5;
  const TrainResult r1 = run(tc, init, ds, small_render());
  const TrainResult r2 = run(tc, init, ds, small_render());
  CHECK(mipgrid::testing::flat(r1.field) == mipgrid::testing::flat(r2.field));
  CHECK(r1.field.density_bank->kernels_1d == init.density_bank->kernels_1d);
  CHECK(r1.field.density_bank->kernels_2d == init.density_bank->kernels_2d);
  CHECK(r1.field.appearance_bank->kernels_1d == init.appearance_bank->kernels_1d);
  CHECK(r1.field.appearance_bank->kernels_2d == init.appearance_bank->kernels_2d);
  CHECK(r1.field.density_grid.res == Resolution{8, 8, 8});
  REQUIRE(r1.metrics.size() == r2.metrics.size());
  for (std::size_t i = 0; i < r1.metrics.size(); ++i) {
    CHECK(r1.metrics[i].loss == r2.metrics[i].loss);
    CHECK(r1.metrics[i].eval_psnr == r2.metrics[i].eval_psnr);
  }
  CHECK(r1.rng_state == r2.rng_state);
}

TEST_CASE("run: kernels move once unfrozen") {
  const MultiScaleDataset ds = small_dataset();
  const ModelConfig m = small_model();
  const RadianceField init = build_field(m, compute_anchors(m, ds), 3);
  TrainConfig tc;
  tc.iterations = 6;
  tc.batch_rays = 64;
  tc.kernel_start = 3;
  const TrainResult r = run(tc, init, ds, small_render());
  CHECK(r.field.appearance_bank->kernels_1d != init.appearance_bank->kernels_1d);
}

TEST_CASE("run: non-finite loss aborts with the last finite parameters") {
  const MultiScaleDataset ds = small_dataset();
  const ModelConfig m = small_model();
  RadianceField init = build_field(m, compute_anchors(m, ds), 3);
  init.decoder.b2[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.iterations = 3;
  tc.batch_rays = 16;
  const TrainResult r = run(tc, init, ds, small_render());
  CHECK(r.aborted);
  CHECK(r.completed_iterations == 0);
  CHECK(r.diagnostic.find("iteration 0") != std::string::npos);
}
