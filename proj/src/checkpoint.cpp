// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "mipgrid/error.hpp"

namespace mipgrid {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes(b) {}
  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw IoError("truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes.begin() + pos, bytes.begin() + pos + n);
    pos += n;
    return s;
  }
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
};

constexpr char kMagic[4] = {'M', 'G', 'R', 'D'};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt, DType dtype) {
  RadianceField field = ckpt.field;
  field.validate();
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(field.density_grid.family));
  w.u32(static_cast<std::uint32_t>(field.scales()));
  w.u32(static_cast<std::uint32_t>(field.multiscale() ? field.density_bank->kernel_size : 0));
  w.u32(static_cast<std::uint32_t>(field.density_grid.rank));
  w.u32(static_cast<std::uint32_t>(field.appearance_grid.rank));
  w.u32(static_cast<std::uint32_t>(field.decoder.channels));
  w.u32(static_cast<std::uint32_t>(field.decoder.hidden));
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(field.density_grid.res[a]));
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(field.appearance_grid.res[a]));
  w.u8(static_cast<std::uint8_t>(field.scale_kind));
  w.u8(field.multiscale() && field.density_bank->trainable ? 1 : 0);
  w.u8(field.density_bank_b ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(field.index_map.size()));
  for (double a : field.index_map.anchors()) w.f64(a);
  w.u32(static_cast<std::uint32_t>(field.distance_map.size()));
  for (double a : field.distance_map.anchors()) w.f64(a);
  for (int a = 0; a < 3; ++a) w.f64(field.box.min[a]);
  for (int a = 0; a < 3; ++a) w.f64(field.box.max[a]);
  w.u64(ckpt.iteration);

  const auto blocks = field.blocks();
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    w.str(b.name);
    w.u8(static_cast<std::uint8_t>(dtype));
    w.u32(static_cast<std::uint32_t>(b.shape.size()));
    for (std::size_t d : b.shape) w.u64(d);
    for (double v : b.values) {
      if (dtype == DType::f64) {
        w.f64(v);
      } else {
        w.f32(static_cast<float>(v));
      }
    }
  }
  w.str(ckpt.config_text);
  w.str(ckpt.rng_state);
  return std::move(w.out);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw IoError("not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint8_t family_raw = r.u8();
  if (family_raw > 1) throw IoError("unknown model family in checkpoint");
  const Family family = static_cast<Family>(family_raw);
  const int scales = static_cast<int>(r.u32());
  const int ksize = static_cast<int>(r.u32());
  const int rank_d = static_cast<int>(r.u32());
  const int rank_a = static_cast<int>(r.u32());
  const int channels = static_cast<int>(r.u32());
  const int hidden = static_cast<int>(r.u32());
  Resolution res_d{}, res_a{};
  res_d.x = static_cast<int>(r.u32());
  res_d.y = static_cast<int>(r.u32());
  res_d.z = static_cast<int>(r.u32());
  res_a.x = static_cast<int>(r.u32());
  res_a.y = static_cast<int>(r.u32());
  res_a.z = static_cast<int>(r.u32());
  const std::uint8_t kind_raw = r.u8();
  if (kind_raw > 2) throw IoError("unknown scale coordinate kind in checkpoint");
  const bool trainable = r.u8() != 0;
  const bool second_bank = r.u8() != 0;
  std::vector<double> anchors(r.u32());
  for (double& a : anchors) a = r.f64();
  std::vector<double> dist(r.u32());
  for (double& a : dist) a = r.f64();

  Checkpoint ck;
  RadianceField& f = ck.field;
  for (int a = 0; a < 3; ++a) f.box.min[a] = r.f64();
  for (int a = 0; a < 3; ++a) f.box.max[a] = r.f64();
  ck.iteration = r.u64();

  try {
    f.density_grid = FactorGrid::zeros(family, res_d, rank_d);
    f.appearance_grid = FactorGrid::zeros(family, res_a, rank_a);
    f.decoder = DecoderMLP::zeros(f.appearance_grid.feature_count(), channels, hidden);
    f.scale_kind = static_cast<ScaleKind>(kind_raw);
    if (scales > 1) {
      f.density_bank = MipKernelBank::identity(family, rank_d, scales, ksize);
      f.appearance_bank = MipKernelBank::identity(family, rank_a, scales, ksize);
      f.density_bank->trainable = f.appearance_bank->trainable = trainable;
      if (second_bank) {
        f.density_bank_b = f.density_bank;
        f.appearance_bank_b = f.appearance_bank;
      }
      f.index_map = ScaleIndexMap(anchors);
      if (!dist.empty()) f.distance_map = ScaleIndexMap(dist);
    }
  } catch (const std::exception& e) {
    throw IoError(std::string("inconsistent checkpoint header: ") + e.what());
  }

  auto blocks = f.blocks();
  std::map<std::string, std::size_t> index;
  for (std::size_t b = 0; b < blocks.size(); ++b) index[blocks[b].name] = b;
  std::vector<bool> seen(blocks.size(), false);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint8_t dtype = r.u8();
    if (dtype > 1) throw IoError("unknown dtype in block " + name);
    std::vector<std::size_t> shape(r.u32());
    for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
    const auto it = index.find(name);
    if (it == index.end()) throw IoError("unexpected block " + name + " in checkpoint");
    ParamBlock& b = blocks[it->second];
    if (shape != b.shape) throw IoError("shape mismatch in block " + name);
    for (double& v : b.values) v = dtype == 1 ? r.f64() : static_cast<double>(r.f32());
    seen[it->second] = true;
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!seen[b]) throw IoError("checkpoint is missing block " + blocks[b].name);
  }
  ck.config_text = r.str();
  ck.rng_state = r.str();
  if (r.pos != bytes.size()) throw IoError("trailing bytes in checkpoint");
  try {
    f.validate();
  } catch (const std::exception& e) {
    throw IoError(std::string("invalid checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, DType dtype) {
  const auto bytes = serialize_checkpoint(ckpt, dtype);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace mipgrid
