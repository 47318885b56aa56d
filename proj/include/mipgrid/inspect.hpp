// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "mipgrid/field.hpp"

namespace mipgrid {

struct InspectOptions {
  bool grid_slices = false;  // XY slices of the generated appearance grids
  int slice_rank = 0;
};

// One line per (bank, scale, axis, rank) with the kernel second moments,
// plus per-scale means. Single-scale fields report no kernels.
std::string kernel_report(const RadianceField& field);

// Writes report.txt and one min-max normalized grayscale PNG per kernel
// (the bounds go into the report). Returns the report text.
std::string inspect_kernels(const RadianceField& field, const std::filesystem::path& out_dir,
                            const InspectOptions& options = {});

}  // namespace mipgrid
