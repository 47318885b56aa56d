// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/scalecoord.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mipgrid {

const char* to_string(ScaleKind kind) {
  switch (kind) {
    case ScaleKind::discrete:
      return "disc";
    case ScaleKind::continuous:
      return "cont";
    case ScaleKind::two_d:
      return "2d";
  }
  return "?";
}

ScaleKind scale_kind_from_string(std::string_view name) {
  if (name == "disc") return ScaleKind::discrete;
  if (name == "cont") return ScaleKind::continuous;
  if (name == "2d") return ScaleKind::two_d;
  throw std::invalid_argument("unknown scale coordinate kind '" + std::string(name) + "' (expected disc|cont|2d)");
}

ScaleCoordinate ScaleCoordinate::discrete(double s_disc) {
  ScaleCoordinate c{ScaleKind::discrete, s_disc, std::nullopt};
  c.validate();
  return c;
}

ScaleCoordinate ScaleCoordinate::continuous(double s_cont) {
  ScaleCoordinate c{ScaleKind::continuous, s_cont, std::nullopt};
  c.validate();
  return c;
}

ScaleCoordinate ScaleCoordinate::two_d(double s_cont, double distance) {
  ScaleCoordinate c{ScaleKind::two_d, s_cont, distance};
  c.validate();
  return c;
}

void ScaleCoordinate::validate() const {
  if (!std::isfinite(primary) || !(primary > 0.0)) throw std::invalid_argument("scale value must be positive");
  if (kind == ScaleKind::two_d) {
    if (!secondary || !std::isfinite(*secondary) || !(*secondary > 0.0)) {
      throw std::invalid_argument("2d scale coordinate needs a positive distance channel");
    }
  } else if (secondary) {
    throw std::invalid_argument("only 2d scale coordinates carry a distance channel");
  }
}

ScaleIndexMap::ScaleIndexMap(std::vector<double> anchors) : anchors_(std::move(anchors)) {
  if (anchors_.size() < 2) throw std::invalid_argument("a scale index map needs at least two anchors");
  for (double a : anchors_) {
    if (!std::isfinite(a) || !(a > 0.0)) throw std::invalid_argument("scale anchors must be positive");
  }
  descending_ = anchors_[1] < anchors_[0];
  for (std::size_t i = 1; i < anchors_.size(); ++i) {
    const bool ok = descending_ ? anchors_[i] < anchors_[i - 1] : anchors_[i] > anchors_[i - 1];
    if (!ok) throw std::invalid_argument("scale anchors must be strictly monotone");
  }
  log_anchors_.resize(anchors_.size());
  std::transform(anchors_.begin(), anchors_.end(), log_anchors_.begin(), [](double a) { return std::log2(a); });
  if (descending_) std::reverse(log_anchors_.begin(), log_anchors_.end());
}

double ScaleIndexMap::index(double value) const {
  if (anchors_.empty()) throw std::logic_error("scale index map is empty");
  const int last = size() - 1;
  const double lv = std::log2(value);
  double idx;
  if (lv <= log_anchors_.front()) {
    idx = 0.0;
  } else if (lv >= log_anchors_.back()) {
    idx = last;
  } else {
    const auto it = std::upper_bound(log_anchors_.begin(), log_anchors_.end(), lv);
    const int hi = static_cast<int>(it - log_anchors_.begin());
    const int lo = hi - 1;
    idx = lo + (lv - log_anchors_[lo]) / (log_anchors_[hi] - log_anchors_[lo]);
  }
  return descending_ ? last - idx : idx;
}

double discrete_scale(double focal_x, double focal_y) {
  if (!(focal_x > 0.0) || !(focal_y > 0.0)) throw std::invalid_argument("focal lengths must be positive");
  return 0.5 * (1.0 / focal_x + 1.0 / focal_y) * 2.0 / std::sqrt(12.0);
}

double discrete_scale(const CameraModel& camera) { return discrete_scale(camera.focal_x, camera.focal_y); }

double continuous_scale(double s_disc, double t) {
  if (!(s_disc > 0.0)) throw std::invalid_argument("discrete scale must be positive");
  if (!(t > 0.0)) throw std::invalid_argument("ray distance must be positive");
  return s_disc * t;
}

double to_fractional_index(const ScaleIndexMap& map, double value) {
  if (!(value > 0.0)) throw std::invalid_argument("scale value must be positive");
  return map.index(value);
}

ScaleIndexMap default_anchors(double base_s_disc, std::span<const double> factors) {
  if (!(base_s_disc > 0.0)) throw std::invalid_argument("base scale must be positive");
  if (factors.size() < 2) throw std::invalid_argument("need at least two scale factors (S >= 2)");
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (!(factors[i] > 0.0)) throw std::invalid_argument("scale factors must be positive");
    if (i > 0 && !(factors[i] > factors[i - 1])) throw std::invalid_argument("scale factors must be ascending");
  }
  std::vector<double> anchors(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) anchors[i] = base_s_disc * factors[i];
  return ScaleIndexMap(std::move(anchors));
}

ScaleIndexMap quantile_anchors(std::vector<double> distances, int scales) {
  if (scales < 2) throw std::invalid_argument("need S >= 2 quantile anchors");
  if (distances.empty()) throw std::invalid_argument("no distances to take quantiles of");
  std::sort(distances.begin(), distances.end());
  std::vector<double> anchors(scales);
  const double n = static_cast<double>(distances.size());
  for (int i = 0; i < scales; ++i) {
    const double q = (i + 0.5) / scales;
    const double pos = q * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, distances.size() - 1);
    const double f = pos - static_cast<double>(lo);
    anchors[i] = (1.0 - f) * distances[lo] + f * distances[hi];
  }
  return ScaleIndexMap(std::move(anchors));
}

}  // namespace mipgrid
