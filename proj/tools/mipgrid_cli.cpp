// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
//
// mipgrid: train, render, eval, gen-data, inspect-kernels.
// Exit codes: 0 ok, 2 usage/config error, 3 runtime failure.
#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mipgrid/checkpoint.hpp"
#include "mipgrid/config.hpp"
#include "mipgrid/data.hpp"
#include "mipgrid/error.hpp"
#include "mipgrid/eval.hpp"
#include "mipgrid/inspect.hpp"
#include "mipgrid/model_config.hpp"
#include "mipgrid/train.hpp"

namespace fs = std::filesystem;
using namespace mipgrid;

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config_path, "flat key=value config file");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "global seed");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--set", c.overrides, "config override key=value (repeatable)");
}

Config resolve_config(const Common& c, const std::string& base_text = {}) {
  Config cfg = base_text.empty() ? Config{} : parse_config(base_text);
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw ConfigError("cannot read config " + c.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = parse_config(ss.str(), cfg);
  }
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.scene.scene.seed = *c.seed;
  }
  cfg.train.threads = c.threads;
  validate(cfg);
  return cfg;
}

MultiScaleDataset load_dataset(const Config& cfg) {
  if (cfg.data_path.empty()) throw ConfigError("data.path is not set");
  if (!fs::is_directory(cfg.data_path)) throw ConfigError("data.path does not exist: " + cfg.data_path);
  BlenderLoadOptions opt;
  opt.background = cfg.render.background;
  opt.near = cfg.near;
  opt.far = cfg.far;
  opt.max_train = cfg.max_train;
  opt.max_test = cfg.max_test;
  const MultiScaleDataset base = load_blender(cfg.data_path, opt);
  return make_multiscale(base, cfg.factors);
}

fs::path ensure_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out + ": " + ec.message());
  return out;
}

// "8/3", "2", "0.375"
double parse_factor(const std::string& text) {
  auto num = [&](const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("bad --factor '" + text + "'");
    return v;
  };
  const auto slash = text.find('/');
  const double v = slash == std::string::npos ? num(text) : num(text.substr(0, slash)) / num(text.substr(slash + 1));
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("--factor must be positive, got '" + text + "'");
  return v;
}

int cmd_train(const Common& c) {
  const Config cfg = resolve_config(c);
  const fs::path out = ensure_out(c.out);
  const MultiScaleDataset ds = load_dataset(cfg);
  const AnchorSet anchors = compute_anchors(cfg.model, ds);
  const RadianceField init = build_field(cfg.model, anchors, cfg.train.seed);
  std::fprintf(stderr, "training %zu parameters, %zu scales\n", RadianceField(init).parameter_count(),
               ds.scales.size());
  const TrainResult res = run(cfg.train, init, ds, cfg.render, [](const MetricsRow& r) {
    std::fprintf(stderr, "iter %6d  loss %.6f  train_psnr %.2f", r.iteration, r.loss, r.train_psnr);
    for (double p : r.eval_psnr) std::fprintf(stderr, "  %.2f", p);
    std::fprintf(stderr, "  (%.1fs)\n", r.wall_clock_s);
  });
  Checkpoint ck;
  ck.field = res.field;
  ck.config_text = to_text(cfg);
  ck.rng_state = res.rng_state;
  ck.iteration = static_cast<std::uint64_t>(res.completed_iterations);
  save_checkpoint(out / "model.ckpt", ck);
  write_metrics_csv(out / "metrics.csv", res.metrics, res.factors);
  std::ofstream(out / "config.txt") << ck.config_text;
  if (res.aborted) {
    std::fprintf(stderr, "error: training aborted: %s (last finite parameters saved)\n", res.diagnostic.c_str());
    return 3;
  }
  return 0;
}

struct RenderArgs {
  std::string checkpoint;
  std::string factor = "1";
  std::optional<double> scale_value;
  std::optional<double> distance_value;
  std::optional<int> view;
  std::string data;
};

int cmd_render(const Common& c, const RenderArgs& a) {
  const double factor = parse_factor(a.factor);
  if (a.scale_value && !(*a.scale_value > 0.0)) throw ConfigError("--scale-value must be positive");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (a.distance_value) {
    if (ck.field.scale_kind != ScaleKind::two_d) {
      throw ConfigError("--distance-value needs a model with 2d scale coordinates, this one uses " +
                        std::string(to_string(ck.field.scale_kind)));
    }
    if (!(*a.distance_value > 0.0)) throw ConfigError("--distance-value must be positive");
  }
  Common cc = c;
  if (!a.data.empty()) cc.overrides.push_back("data.path=" + a.data);
  const Config cfg = resolve_config(cc, ck.config_text);
  const fs::path out = ensure_out(c.out);
  BlenderLoadOptions opt;
  opt.background = cfg.render.background;
  opt.near = cfg.near;
  opt.far = cfg.far;
  if (cfg.data_path.empty() || !fs::is_directory(cfg.data_path)) throw ConfigError("data.path does not exist");
  const MultiScaleDataset ds = load_blender(cfg.data_path, opt);
  RenderSettings rs = cfg.render;
  rs.scale_override = a.scale_value;
  rs.distance_override = a.distance_value;
  const auto& views = ds.base().test;
  if (a.view && (*a.view < 0 || *a.view >= static_cast<int>(views.size()))) {
    throw ConfigError("--view out of range (dataset has " + std::to_string(views.size()) + " test views)");
  }
  const FieldSnapshot snap = make_snapshot(ck.field);
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (a.view && static_cast<int>(i) != *a.view) continue;
    const CameraModel& base = views[i].camera;
    const int w = static_cast<int>(std::lround(base.width / factor));
    const int h = static_cast<int>(std::lround(base.height / factor));
    if (w < 1 || h < 1) throw ConfigError("--factor leaves an empty image");
    const Image img = render_image(ck.field, snap, base.resized(w, h), rs, c.threads);
    char name[32];
    std::snprintf(name, sizeof(name), "r_%03zu.png", i);
    write_png(out / name, img);
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  Common cc = c;
  if (!data.empty()) cc.overrides.push_back("data.path=" + data);
  const Config cfg = resolve_config(cc, ck.config_text);
  const MultiScaleDataset ds = load_dataset(cfg);
  if (ck.field.multiscale()) {
    const AnchorSet expect = compute_anchors(cfg.model, ds);
    const auto& got = ck.field.index_map.anchors();
    const auto& want = expect.index_map.anchors();
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i) ok = std::abs(got[i] - want[i]) <= 1e-9 * std::abs(want[i]);
    if (!ok) throw ConfigError("dataset cameras do not match the resolution/focal the model was trained with");
  }
  const EvalReport report = evaluate(ck.field, test_sets(ds), cfg.render, c.threads);
  if (!c.out.empty()) write_eval_csv(ensure_out(c.out) / "eval.csv", report);
  std::cout << format_eval_table(report);
  return 0;
}

int cmd_gen_data(const Common& c) {
  const Config cfg = resolve_config(c);
  const fs::path out = ensure_out(c.out);
  ProceduralDatasetSpec spec = cfg.scene;
  spec.factors = cfg.factors;
  write_procedural_dataset(spec, out);
  std::fprintf(stderr, "wrote %d train / %d test views at %zu scales to %s\n", spec.n_train, spec.n_test,
               spec.factors.size(), out.string().c_str());
  return 0;
}

int cmd_inspect(const Common& c, const std::string& checkpoint, bool slices) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const fs::path out = ensure_out(c.out);
  InspectOptions opt;
  opt.grid_slices = slices;
  std::cout << inspect_kernels(ck.field, out, opt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mip-grid radiance fields: multi-scale factorized grids"};
  app.require_subcommand(1);

  Common train_c, render_c, eval_c, gen_c, inspect_c;
  auto* train = app.add_subcommand("train", "train a model from a config");
  add_common(train, train_c, true);

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "render test views of a checkpoint");
  add_common(render, render_c, false);
  render->add_option("--checkpoint", ra.checkpoint)->required();
  render->add_option("--factor", ra.factor, "downscale factor, e.g. 1, 8, 8/3");
  render->add_option("--scale-value", ra.scale_value, "explicit discrete scale value");
  render->add_option("--distance-value", ra.distance_value, "explicit ray distance (2d models only)");
  render->add_option("--view", ra.view, "single test view index");
  render->add_option("--data", ra.data, "dataset directory (default: the checkpoint's data.path)");

  std::string eval_ckpt, eval_data;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM on the multi-scale test split");
  add_common(eval, eval_c, false);
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data, "dataset directory (default: the checkpoint's data.path)");

  auto* gen = app.add_subcommand("gen-data", "write the procedural checker-sphere dataset");
  add_common(gen, gen_c, false);

  std::string insp_ckpt;
  bool slices = false;
  auto* inspect = app.add_subcommand("inspect-kernels", "kernel PNGs and second-moment report");
  add_common(inspect, inspect_c, false);
  inspect->add_option("--checkpoint", insp_ckpt)->required();
  inspect->add_flag("--slices", slices, "also write XY slices of the generated appearance grids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_c);
    if (*render) return cmd_render(render_c, ra);
    if (*eval) return cmd_eval(eval_c, eval_ckpt, eval_data);
    if (*gen) return cmd_gen_data(gen_c);
    if (*inspect) return cmd_inspect(inspect_c, insp_ckpt, slices);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
