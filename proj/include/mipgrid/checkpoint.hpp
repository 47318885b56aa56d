// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mipgrid/field.hpp"

namespace mipgrid {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian layout:
//   "MGRD" u32 version
//   u8 family, u32 S, u32 K, u32 density rank, u32 appearance rank,
//   u32 channels, u32 hidden, 3 x u32 density res, 3 x u32 appearance res,
//   u8 scale kind, u8 kernels trainable, u8 second bank,
//   u32 n + n x f64 anchors, u32 n + n x f64 distance anchors, 6 x f64 box,
//   u64 iteration,
//   u32 block count, per block: str name, u8 dtype (0 f32, 1 f64),
//     u32 ndim, ndim x u64 shape, payload
//   str config echo, str rng state
// where str is u32 length + bytes.
struct Checkpoint {
  RadianceField field;
  std::string config_text;
  std::string rng_state;
  std::uint64_t iteration = 0;
};

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt, DType dtype = DType::f64);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

// Throws IoError on write/read failures, bad magic, unknown versions or
// truncated payloads.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, DType dtype = DType::f64);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mipgrid
