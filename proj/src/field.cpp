// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mipgrid {

namespace {

// Four partial sums: lets the compiler keep independent FMA chains in flight
// without -ffast-math. Summation order is fixed, so results stay deterministic.
double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

void encode_direction(const Vec3& d, std::span<double> out) {
  out[0] = d[0];
  out[1] = d[1];
  out[2] = d[2];
  int k = 3;
  for (int o = 0; o < kDirOctaves; ++o) {
    const double freq = static_cast<double>(1 << o);
    for (int a = 0; a < 3; ++a) out[k++] = std::sin(freq * d[a]);
    for (int a = 0; a < 3; ++a) out[k++] = std::cos(freq * d[a]);
  }
}

DecoderMLP DecoderMLP::zeros(int feature_count, int channels, int hidden) {
  if (feature_count < 1 || channels < 1 || hidden < 1) throw std::invalid_argument("decoder sizes must be positive");
  DecoderMLP m;
  m.feature_count = feature_count;
  m.channels = channels;
  m.hidden = hidden;
  m.basis.assign(static_cast<std::size_t>(channels) * feature_count, 0.0);
  m.w1.assign(static_cast<std::size_t>(hidden) * m.input_size(), 0.0);
  m.b1.assign(hidden, 0.0);
  m.w2.assign(static_cast<std::size_t>(3) * hidden, 0.0);
  m.b2.assign(3, 0.0);
  return m;
}

bool DecoderMLP::same_shape(const DecoderMLP& o) const {
  return feature_count == o.feature_count && channels == o.channels && hidden == o.hidden;
}

DirectionTerm decoder_direction_term(const DecoderMLP& mlp, const Vec3& dir) {
  DirectionTerm term;
  term.encoding.resize(kDirEncodingSize);
  encode_direction(dir, term.encoding);
  term.hidden_bias.resize(mlp.hidden);
  const int in = mlp.input_size();
  for (int h = 0; h < mlp.hidden; ++h) {
    const double* row = mlp.w1.data() + static_cast<std::size_t>(h) * in + mlp.channels;
    double acc = mlp.b1[h];
    for (int k = 0; k < kDirEncodingSize; ++k) acc += row[k] * term.encoding[k];
    term.hidden_bias[h] = acc;
  }
  return term;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec3 decoder_forward(const DecoderMLP& mlp, const DirectionTerm& dir, std::span<const double> features,
                     DecoderScratch& s) {
  s.channels.resize(mlp.channels);
  s.hidden_pre.resize(mlp.hidden);
  const int f = mlp.feature_count;
  for (int c = 0; c < mlp.channels; ++c) {
    const double* row = mlp.basis.data() + static_cast<std::size_t>(c) * f;
    s.channels[c] = dot(row, features.data(), f);
  }
  const int in = mlp.input_size();
  std::array<double, 3> logits = {mlp.b2[0], mlp.b2[1], mlp.b2[2]};
  for (int h = 0; h < mlp.hidden; ++h) {
    const double* row = mlp.w1.data() + static_cast<std::size_t>(h) * in;
    const double acc = dir.hidden_bias[h] + dot(row, s.channels.data(), mlp.channels);
    s.hidden_pre[h] = acc;
    if (acc > 0.0) {
      logits[0] += mlp.w2[h] * acc;
      logits[1] += mlp.w2[mlp.hidden + h] * acc;
      logits[2] += mlp.w2[2 * mlp.hidden + h] * acc;
    }
  }
  s.rgb = {sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2])};
  return s.rgb;
}

void decoder_backward(const DecoderMLP& mlp, std::span<const double> features, const DecoderScratch& s,
                      const Vec3& grad_rgb, DecoderMLP& grad, std::span<double> grad_hidden_bias,
                      std::span<double> grad_features) {
  std::array<double, 3> gl{};
  for (int k = 0; k < 3; ++k) {
    gl[k] = grad_rgb[k] * s.rgb[k] * (1.0 - s.rgb[k]);
    grad.b2[k] += gl[k];
  }
  const int in = mlp.input_size();
  const int f = mlp.feature_count;
  thread_local std::vector<double> grad_channels;
  grad_channels.assign(mlp.channels, 0.0);
  for (int h = 0; h < mlp.hidden; ++h) {
    const double pre = s.hidden_pre[h];
    if (pre <= 0.0) continue;
    grad.w2[h] += gl[0] * pre;
    grad.w2[mlp.hidden + h] += gl[1] * pre;
    grad.w2[2 * mlp.hidden + h] += gl[2] * pre;
    const double gh = gl[0] * mlp.w2[h] + gl[1] * mlp.w2[mlp.hidden + h] + gl[2] * mlp.w2[2 * mlp.hidden + h];
    if (gh == 0.0) continue;
    grad_hidden_bias[h] += gh;
    const double* row = mlp.w1.data() + static_cast<std::size_t>(h) * in;
    double* grow = grad.w1.data() + static_cast<std::size_t>(h) * in;
    for (int c = 0; c < mlp.channels; ++c) {
      grow[c] += gh * s.channels[c];
      grad_channels[c] += gh * row[c];
    }
  }
  std::fill(grad_features.begin(), grad_features.end(), 0.0);
  for (int c = 0; c < mlp.channels; ++c) {
    const double gc = grad_channels[c];
    if (gc == 0.0) continue;
    const double* row = mlp.basis.data() + static_cast<std::size_t>(c) * f;
    double* grow = grad.basis.data() + static_cast<std::size_t>(c) * f;
    for (int k = 0; k < f; ++k) {
      grow[k] += gc * features[k];
      grad_features[k] += gc * row[k];
    }
  }
}

void decoder_direction_backward(const DecoderMLP& mlp, const DirectionTerm& dir,
                                std::span<const double> grad_hidden_bias, DecoderMLP& grad) {
  const int in = mlp.input_size();
  for (int h = 0; h < mlp.hidden; ++h) {
    const double gh = grad_hidden_bias[h];
    if (gh == 0.0) continue;
    grad.b1[h] += gh;
    double* grow = grad.w1.data() + static_cast<std::size_t>(h) * in + mlp.channels;
    for (int k = 0; k < kDirEncodingSize; ++k) grow[k] += gh * dir.encoding[k];
  }
}

namespace {

void add_grid_blocks(std::vector<ParamBlock>& out, const std::string& prefix, FactorGrid& g) {
  static const char* kAxis[3] = {"x", "y", "z"};
  static const char* kPlane[3] = {"yz", "xz", "xy"};
  const auto r = static_cast<std::size_t>(g.rank);
  if (g.family == Family::vm) {
    for (int a = 0; a < 3; ++a) {
      out.push_back({prefix + ".vec_" + kAxis[a], g.vectors[a], {r, static_cast<std::size_t>(g.res[a])},
                     BlockGroup::grid});
    }
  }
  for (int a = 0; a < 3; ++a) {
    out.push_back({prefix + ".plane_" + kPlane[a],
                   g.planes[a],
                   {r, static_cast<std::size_t>(g.plane_rows(a)), static_cast<std::size_t>(g.plane_cols(a))},
                   BlockGroup::grid});
  }
}

void add_bank_blocks(std::vector<ParamBlock>& out, const std::string& prefix, std::optional<MipKernelBank>& bank) {
  if (!bank) return;
  const auto s = static_cast<std::size_t>(bank->scales);
  const auto r = static_cast<std::size_t>(bank->rank);
  const auto k = static_cast<std::size_t>(bank->kernel_size);
  if (bank->family == Family::vm) out.push_back({prefix + ".k1d", bank->kernels_1d, {s, 3, r, k}, BlockGroup::kernel});
  out.push_back({prefix + ".k2d", bank->kernels_2d, {s, 3, r, k, k}, BlockGroup::kernel});
}

}  // namespace

std::vector<ParamBlock> RadianceField::blocks() {
  std::vector<ParamBlock> out;
  add_grid_blocks(out, "density", density_grid);
  add_grid_blocks(out, "appearance", appearance_grid);
  add_bank_blocks(out, "density_bank", density_bank);
  add_bank_blocks(out, "appearance_bank", appearance_bank);
  add_bank_blocks(out, "density_bank_b", density_bank_b);
  add_bank_blocks(out, "appearance_bank_b", appearance_bank_b);
  const auto f = static_cast<std::size_t>(decoder.feature_count);
  const auto c = static_cast<std::size_t>(decoder.channels);
  const auto h = static_cast<std::size_t>(decoder.hidden);
  out.push_back({"decoder.basis", decoder.basis, {c, f}, BlockGroup::decoder});
  out.push_back({"decoder.w1", decoder.w1, {h, static_cast<std::size_t>(decoder.input_size())}, BlockGroup::decoder});
  out.push_back({"decoder.b1", decoder.b1, {h}, BlockGroup::decoder});
  out.push_back({"decoder.w2", decoder.w2, {3, h}, BlockGroup::decoder});
  out.push_back({"decoder.b2", decoder.b2, {3}, BlockGroup::decoder});
  out.push_back({"density_shift", std::span<double>(&density_shift, 1), {1}, BlockGroup::decoder});
  return out;
}

std::size_t RadianceField::parameter_count() {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.values.size();
  return n;
}

void RadianceField::validate() const {
  density_grid.validate();
  appearance_grid.validate();
  if (density_grid.family != appearance_grid.family) {
    throw std::invalid_argument("density and appearance grids must share a factorization family");
  }
  if (density_bank.has_value() != appearance_bank.has_value()) {
    throw std::invalid_argument("density and appearance kernel banks must both be present or both absent");
  }
  auto check_bank = [](const std::optional<MipKernelBank>& bank, const FactorGrid& grid) {
    if (!bank) return;
    bank->validate();
    bank->check_compatible(grid);
  };
  check_bank(density_bank, density_grid);
  check_bank(appearance_bank, appearance_grid);
  check_bank(density_bank_b, density_grid);
  check_bank(appearance_bank_b, appearance_grid);
  if (multiscale()) {
    if (density_bank->scales != appearance_bank->scales) throw std::invalid_argument("banks disagree on S");
    if (index_map.size() != density_bank->scales) {
      throw std::invalid_argument("scale index map needs exactly S anchors");
    }
    const bool two = scale_kind == ScaleKind::two_d;
    if (two != density_bank_b.has_value() || two != appearance_bank_b.has_value()) {
      throw std::invalid_argument("2d scale coordinates need a second kernel bank per grid (and only they do)");
    }
    if (two && distance_map.size() != density_bank->scales) {
      throw std::invalid_argument("distance index map needs exactly S anchors");
    }
  }
  if (decoder.feature_count != appearance_grid.feature_count()) {
    throw std::invalid_argument("decoder input does not match the appearance feature count");
  }
  if (!std::isfinite(density_shift)) throw std::invalid_argument("density shift is not finite");
}

RadianceField zeros_like(const RadianceField& field) {
  RadianceField z = field;
  for (auto& b : z.blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
  return z;
}

FieldSnapshot make_snapshot(const RadianceField& field) {
  FieldSnapshot snap;
  if (!field.multiscale()) {
    snap.density = {field.density_grid};
    snap.appearance = {field.appearance_grid};
    return snap;
  }
  snap.density = generate(field.density_grid, *field.density_bank);
  snap.appearance = generate(field.appearance_grid, *field.appearance_bank);
  if (field.density_bank_b) snap.density_b = generate(field.density_grid, *field.density_bank_b);
  if (field.appearance_bank_b) snap.appearance_b = generate(field.appearance_grid, *field.appearance_bank_b);
  return snap;
}

void fill_zero(FieldSnapshot& snapshot) {
  for (auto* ms : {&snapshot.density, &snapshot.appearance, &snapshot.density_b, &snapshot.appearance_b}) {
    for (auto& g : *ms) g.fill(0.0);
  }
}

FieldSnapshot zeros_like(const FieldSnapshot& snapshot) {
  FieldSnapshot z = snapshot;
  fill_zero(z);
  return z;
}

void snapshot_backward(const RadianceField& field, const FieldSnapshot& grad, RadianceField& grad_field,
                       bool include_kernels) {
  if (!field.multiscale()) {
    grad_field.density_grid.axpy(1.0, grad.density[0]);
    grad_field.appearance_grid.axpy(1.0, grad.appearance[0]);
    return;
  }
  auto bank_grad = [&](std::optional<MipKernelBank>& b) -> MipKernelBank* {
    return include_kernels && b ? &*b : nullptr;
  };
  generate_backward(field.density_grid, *field.density_bank, grad.density, grad_field.density_grid,
                    bank_grad(grad_field.density_bank));
  generate_backward(field.appearance_grid, *field.appearance_bank, grad.appearance, grad_field.appearance_grid,
                    bank_grad(grad_field.appearance_bank));
  if (field.density_bank_b) {
    generate_backward(field.density_grid, *field.density_bank_b, grad.density_b, grad_field.density_grid,
                      bank_grad(grad_field.density_bank_b));
  }
  if (field.appearance_bank_b) {
    generate_backward(field.appearance_grid, *field.appearance_bank_b, grad.appearance_b, grad_field.appearance_grid,
                      bank_grad(grad_field.appearance_bank_b));
  }
}

ScaleQuery scale_query(const RadianceField& field, double s_disc, double t) {
  ScaleQuery q;
  if (!field.multiscale()) return q;
  switch (field.scale_kind) {
    case ScaleKind::discrete:
      q.index = field.index_map.index(s_disc);
      break;
    case ScaleKind::continuous:
      q.index = field.index_map.index(s_disc * t);
      break;
    case ScaleKind::two_d:
      q.index = field.index_map.index(s_disc * t);
      q.index_b = field.distance_map.index(t);
      break;
  }
  return q;
}

ScaleQuery scale_query(const RadianceField& field, const ScaleCoordinate& coord) {
  coord.validate();
  if (coord.kind != field.scale_kind) {
    throw std::invalid_argument(std::string("scale coordinate kind ") + to_string(coord.kind) +
                                " does not match the field's " + to_string(field.scale_kind));
  }
  ScaleQuery q;
  if (!field.multiscale()) return q;
  q.index = field.index_map.index(coord.primary);
  if (coord.kind == ScaleKind::two_d) q.index_b = field.distance_map.index(*coord.secondary);
  return q;
}

namespace {

struct Blend {
  int lo = 0;
  int hi = 0;
  double w = 0.0;
};

Blend blend_for(double idx, int scales) {
  Blend b;
  const double clamped = std::clamp(idx, 0.0, static_cast<double>(scales - 1));
  b.lo = static_cast<int>(std::floor(clamped));
  b.hi = std::min(b.lo + 1, scales - 1);
  b.w = clamped - b.lo;
  return b;
}

}  // namespace

void extract_blended(const MultiScaleGrid& grids, const PointStencil& st, double idx, std::span<double> out,
                     std::span<double> scratch) {
  const Blend b = blend_for(idx, static_cast<int>(grids.size()));
  sample_features(grids[b.lo], st, out);
  if (b.w == 0.0) return;
  const std::size_t n = out.size();
  sample_features(grids[b.hi], st, scratch.first(n));
  for (std::size_t k = 0; k < n; ++k) out[k] = (1.0 - b.w) * out[k] + b.w * scratch[k];
}

void extract_blended_backward(const MultiScaleGrid& grids, const PointStencil& st, double idx,
                              std::span<const double> grad_out, MultiScaleGrid& grad_grids) {
  const Blend b = blend_for(idx, static_cast<int>(grids.size()));
  if (b.w == 0.0) {
    sample_features_backward(grids[b.lo], st, grad_out, grad_grids[b.lo]);
    return;
  }
  thread_local std::vector<double> scaled;
  scaled.resize(grad_out.size());
  for (std::size_t k = 0; k < grad_out.size(); ++k) scaled[k] = (1.0 - b.w) * grad_out[k];
  sample_features_backward(grids[b.lo], st, scaled, grad_grids[b.lo]);
  for (std::size_t k = 0; k < grad_out.size(); ++k) scaled[k] = b.w * grad_out[k];
  sample_features_backward(grids[b.hi], st, scaled, grad_grids[b.hi]);
}

void field_features(const MultiScaleGrid& a, const MultiScaleGrid& b, bool two_banks, const PointStencil& st,
                    const ScaleQuery& q, std::span<double> out, std::span<double> scratch) {
  extract_blended(a, st, q.index, out, scratch);
  if (!two_banks) return;
  const std::size_t n = out.size();
  std::span<double> other = scratch.subspan(n, n);
  extract_blended(b, st, q.index_b, other, scratch.first(n));
  for (std::size_t k = 0; k < n; ++k) out[k] = 0.5 * (out[k] + other[k]);
}

void field_features_backward(const MultiScaleGrid& a, const MultiScaleGrid& b, bool two_banks,
                             const PointStencil& st, const ScaleQuery& q, std::span<const double> grad_out,
                             MultiScaleGrid& grad_a, MultiScaleGrid& grad_b, std::span<double> scratch) {
  if (!two_banks) {
    extract_blended_backward(a, st, q.index, grad_out, grad_a);
    return;
  }
  std::span<double> half = scratch.first(grad_out.size());
  for (std::size_t k = 0; k < grad_out.size(); ++k) half[k] = 0.5 * grad_out[k];
  extract_blended_backward(a, st, q.index, half, grad_a);
  extract_blended_backward(b, st, q.index_b, half, grad_b);
}

std::vector<double> extract_scaled(const FactorGrid& grid, const MipKernelBank& bank, const Vec3& p, double idx) {
  if (!(idx >= 0.0 && idx <= bank.scales - 1)) throw std::invalid_argument("scale index outside [0, S-1]");
  const MultiScaleGrid ms = generate(grid, bank);
  std::vector<double> out(grid.feature_count());
  std::vector<double> scratch(grid.feature_count());
  extract_blended(ms, make_stencil(grid.res, p), idx, out, scratch);
  return out;
}

std::vector<double> extract_2d(const RadianceField& field, const Vec3& p, const ScaleCoordinate& coord) {
  if (coord.kind != ScaleKind::two_d || field.scale_kind != ScaleKind::two_d) {
    throw std::invalid_argument("extract_2d needs a 2d scale coordinate and a 2d field");
  }
  if (!field.appearance_bank_b) throw std::invalid_argument("extract_2d needs two kernel banks per grid");
  const FieldSnapshot snap = make_snapshot(field);
  const ScaleQuery q = scale_query(field, coord);
  const int n = field.appearance_grid.feature_count();
  std::vector<double> out(n);
  std::vector<double> scratch(2 * n);
  field_features(snap.appearance, snap.appearance_b, true, make_stencil(field.appearance_grid.res, p), q, out,
                 scratch);
  return out;
}

double density(const RadianceField& field, const Vec3& x, const ScaleCoordinate& coord) {
  const FieldSnapshot snap = make_snapshot(field);
  const ScaleQuery q = scale_query(field, coord);
  const int n = field.density_grid.feature_count();
  std::vector<double> feat(n);
  std::vector<double> scratch(2 * n);
  field_features(snap.density, snap.density_b, field.density_bank_b.has_value(),
                 make_stencil(field.density_grid.res, field.box.normalize(x)), q, feat, scratch);
  double sum = field.density_shift;
  for (double v : feat) sum += v;
  return softplus(sum);
}

Vec3 color(const RadianceField& field, const Vec3& x, const Vec3& d, const ScaleCoordinate& coord) {
  const double len = norm(d);
  if (!(len > 0.0)) throw std::invalid_argument("view direction must be non-zero");
  const Vec3 dir = (1.0 / len) * d;
  const FieldSnapshot snap = make_snapshot(field);
  const ScaleQuery q = scale_query(field, coord);
  const int n = field.appearance_grid.feature_count();
  std::vector<double> feat(n);
  std::vector<double> scratch(2 * n);
  field_features(snap.appearance, snap.appearance_b, field.appearance_bank_b.has_value(),
                 make_stencil(field.appearance_grid.res, field.box.normalize(x)), q, feat, scratch);
  DecoderScratch ds;
  return decoder_forward(field.decoder, decoder_direction_term(field.decoder, dir), feat, ds);
}

}  // namespace mipgrid
