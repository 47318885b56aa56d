// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mipgrid/image.hpp"

namespace mipgrid {

inline constexpr double kPsnrCap = 99.0;

double mse(const Image& a, const Image& b);
// 10 log10(1 / mse) on [0, 1] images, capped at kPsnrCap (identical images).
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

// Mean SSIM over channels and valid window positions: 11x11 Gaussian window,
// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1. Images smaller than the
// window use the largest odd window that fits (same sigma, renormalized).
double ssim(const Image& a, const Image& b);

}  // namespace mipgrid
