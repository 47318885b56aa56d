// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mipgrid/camera.hpp"

namespace mipgrid {

enum class ScaleKind : std::uint8_t { discrete = 0, continuous = 1, two_d = 2 };

const char* to_string(ScaleKind kind);
// Accepts the config spellings disc, cont, 2d.
ScaleKind scale_kind_from_string(std::string_view name);

struct ScaleCoordinate {
  ScaleKind kind = ScaleKind::discrete;
  double primary = 1.0;
  std::optional<double> secondary;  // raw ray distance, two_d only

  static ScaleCoordinate discrete(double s_disc);
  static ScaleCoordinate continuous(double s_cont);
  static ScaleCoordinate two_d(double s_cont, double distance);

  void validate() const;
};

// Maps a positive scale value to a fractional index in [0, S-1] by
// piecewise-linear interpolation over log2(anchor). Anchors must be strictly
// monotone (ascending or descending); values outside the anchor range clamp.
class ScaleIndexMap {
 public:
  ScaleIndexMap() = default;
  explicit ScaleIndexMap(std::vector<double> anchors);

  double index(double value) const;
  const std::vector<double>& anchors() const { return anchors_; }
  int size() const { return static_cast<int>(anchors_.size()); }
  bool empty() const { return anchors_.empty(); }

 private:
  std::vector<double> anchors_;
  std::vector<double> log_anchors_;  // ascending
  bool descending_ = false;
};

// Mean pixel footprint at unit depth times 2/sqrt(12).
double discrete_scale(double focal_x, double focal_y);
double discrete_scale(const CameraModel& camera);

double continuous_scale(double s_disc, double t);

double to_fractional_index(const ScaleIndexMap& map, double value);

// anchors[i] = base_s_disc * factors[i]; factors must be positive, strictly
// ascending, and at least two long.
ScaleIndexMap default_anchors(double base_s_disc, std::span<const double> factors);

// S anchors at the (i + 0.5) / S quantiles of the given distances.
ScaleIndexMap quantile_anchors(std::vector<double> distances, int scales);

}  // namespace mipgrid
