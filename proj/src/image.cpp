// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mipgrid/error.hpp"

namespace mipgrid {

Image Image::filled(int width, int height, int channels, float value) {
  Image im;
  im.width = width;
  im.height = height;
  im.channels = channels;
  im.data.assign(static_cast<std::size_t>(width) * height * channels, value);
  return im;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3 && image.channels != 4) {
    throw std::invalid_argument("PNG output supports 1, 3 or 4 channels");
  }
  std::vector<png_byte> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 1 ? PNG_FORMAT_GRAY : image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("failed to write PNG " + path.string() + ": " + msg);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot read image " + path.string() + ": " + msg);
  }
  Image image;
  const bool alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  if (alpha) {
    png.format = PNG_FORMAT_RGBA;
    image.channels = 4;
  } else if (color) {
    png.format = PNG_FORMAT_RGB;
    image.channels = 3;
  } else {
    png.format = PNG_FORMAT_GRAY;
    image.channels = 1;
  }
  image.width = static_cast<int>(png.width);
  image.height = static_cast<int>(png.height);
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("corrupt PNG " + path.string() + ": " + msg);
  }
  image.data.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) image.data[i] = bytes[i] / 255.0f;
  return image;
}

Image composite_over(const Image& rgba, const float background[3]) {
  if (rgba.channels != 4) throw std::invalid_argument("composite_over needs an RGBA image");
  Image out = Image::filled(rgba.width, rgba.height, 3, 0.0f);
  for (std::size_t p = 0; p < static_cast<std::size_t>(rgba.width) * rgba.height; ++p) {
    const float a = rgba.data[p * 4 + 3];
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = rgba.data[p * 4 + c] * a + background[c] * (1.0f - a);
  }
  return out;
}

Image downsample2(const Image& image) {
  if (image.width % 2 != 0 || image.height % 2 != 0) {
    throw std::invalid_argument("2x downsampling needs even image dimensions");
  }
  Image out = Image::filled(image.width / 2, image.height / 2, image.channels, 0.0f);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        const float sum = image.at(2 * x, 2 * y, c) + image.at(2 * x + 1, 2 * y, c) + image.at(2 * x, 2 * y + 1, c) +
                          image.at(2 * x + 1, 2 * y + 1, c);
        out.at(x, y, c) = sum * 0.25f;
      }
    }
  }
  return out;
}

Image downsample(const Image& image, int factor) {
  if (factor < 1 || (factor & (factor - 1)) != 0) {
    throw std::invalid_argument("downsample factor must be a power of two");
  }
  if (image.width % factor != 0 || image.height % factor != 0) {
    throw std::invalid_argument("image size " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                " is not divisible by " + std::to_string(factor));
  }
  Image out = image;
  for (int f = factor; f > 1; f /= 2) out = downsample2(out);
  return out;
}

}  // namespace mipgrid
