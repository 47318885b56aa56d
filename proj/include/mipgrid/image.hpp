// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

namespace mipgrid {

// Interleaved float image, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  static Image filled(int width, int height, int channels, float value);

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

// 8-bit PNG. Values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);
// Returns 1 (gray), 3 (RGB) or 4 (RGBA) channel images.
Image read_png(const std::filesystem::path& path);

// Straight RGBA composited over a solid background: rgb * a + bg * (1 - a).
Image composite_over(const Image& rgba, const float background[3]);

// One 2x2 box-average step; width and height must be even.
Image downsample2(const Image& image);
// Repeated 2x2 averaging; factor must be a power of two dividing the size.
Image downsample(const Image& image, int factor);

}  // namespace mipgrid
