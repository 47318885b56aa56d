// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mipgrid/data.hpp"
#include "mipgrid/field.hpp"
#include "mipgrid/render.hpp"

namespace mipgrid {

// Views rendered and scored together; label is the column heading.
struct EvalSet {
  std::string label;
  std::vector<View> views;
};

struct EvalRow {
  std::string scale;
  int image = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalScale {
  std::string scale;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalScale> scales;
  double avg_psnr = 0.0;  // mean of the per-scale means
  double avg_ssim = 0.0;
  double wall_clock_s = 0.0;
};

std::string scale_label(int factor);

// Test split of every dataset scale.
std::vector<EvalSet> test_sets(const MultiScaleDataset& dataset, int max_views = 0);

// Throws std::invalid_argument when a view's camera and image sizes differ.
EvalReport evaluate(const RadianceField& field, const std::vector<EvalSet>& sets, const RenderSettings& settings,
                    int threads = 1);

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);
// Markdown table: PSNR and SSIM per scale plus average; LPIPS shown as n/a.
std::string format_eval_table(const EvalReport& report);

}  // namespace mipgrid
