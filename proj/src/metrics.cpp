// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mipgrid {

double mse(const Image& a, const Image& b) {
  if (!a.same_size(b)) throw std::invalid_argument("image sizes differ");
  if (a.data.empty()) throw std::invalid_argument("empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  return sum / a.data.size();
}

double psnr_from_mse(double m) {
  if (!(m > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(m));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Image& a, const Image& b) {
  if (!a.same_size(b)) throw std::invalid_argument("image sizes differ");
  int win = std::min({11, a.width, a.height});
  if (win % 2 == 0) --win;
  if (win < 1) throw std::invalid_argument("empty image");
  const double sigma = 1.5;
  std::vector<double> g(win);
  double gsum = 0.0;
  for (int i = 0; i < win; ++i) {
    const double d = i - win / 2;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const int ow = a.width - win + 1;
  const int oh = a.height - win + 1;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < win; ++j) {
          for (int i = 0; i < win; ++i) {
            const double w = g[i] * g[j];
            const double u = a.at(x + i, y + j, c);
            const double v = b.at(x + i, y + j, c);
            mx += w * u;
            my += w * v;
            sxx += w * u * u;
            syy += w * v * v;
            sxy += w * u * v;
          }
        }
        const double vx = sxx - mx * mx;
        const double vy = syy - my * my;
        const double cov = sxy - mx * my;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
  }
  return total / (static_cast<double>(ow) * oh * a.channels);
}

}  // namespace mipgrid
