// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mipgrid/camera.hpp"
#include "mipgrid/image.hpp"

namespace mipgrid {

struct View {
  CameraModel camera;
  Image image;  // RGB
  std::string file_path;
};

// One set of train/test views per downsampling factor. Scale 0 is the base
// (factor 1) when built by make_multiscale.
struct MultiScaleDataset {
  struct Scale {
    int factor = 1;
    std::vector<View> train;
    std::vector<View> test;
  };
  std::vector<Scale> scales;

  const Scale& base() const { return scales.front(); }
};

struct BlenderLoadOptions {
  Vec3 background{1.0, 1.0, 1.0};
  double near = 2.0;
  double far = 6.0;
  // 0 keeps every frame.
  int max_train = 0;
  int max_test = 0;
};

// Reads transforms_{train,test}.json and their RGBA PNGs. Throws IoError
// naming the offending file on missing files, malformed JSON or non-RGBA
// images.
MultiScaleDataset load_blender(const std::filesystem::path& dir, const BlenderLoadOptions& options = {});

// focal = 0.5 * width / tan(0.5 * camera_angle_x)
double focal_from_camera_angle(double camera_angle_x, int width);

// Adds downsampled copies of the base scale: box-averaged images,
// focal / f, principal point / f, size / f.
MultiScaleDataset make_multiscale(const MultiScaleDataset& base, std::span<const int> factors);
CameraModel downscale_camera(const CameraModel& camera, int factor);

// Checkerboard-textured sphere with closed-form intersection. The texture is
// a solid 3-D checker evaluated at the hit point:
// parity(floor(f x) + floor(f y) + floor(f z)) picks color_a or color_b.
struct ProceduralScene {
  Vec3 center{0.0, 0.0, 0.0};
  double radius = 1.0;
  double checker_frequency = 2.0;  // cells per world unit
  Vec3 color_a{0.9, 0.9, 0.9};
  Vec3 color_b{0.1, 0.2, 0.6};
  // Camera orbit.
  double orbit_radius = 4.0;
  double camera_angle_x = 0.7;
  int width = 64;
  int height = 64;
  double near = 2.0;
  double far = 6.0;
  std::uint64_t seed = 0;
  // Supersamples per axis (4 gives 16 per pixel).
  int supersample = 4;
};

// Nearest positive ray-sphere hit distance, if any.
std::optional<double> intersect_sphere(const ProceduralScene& scene, const Vec3& origin, const Vec3& dir);
Vec3 checker_color(const ProceduralScene& scene, const Vec3& point);

// Deterministic orbit camera for view index i of n (seeded jitter in azimuth
// and elevation).
CameraModel orbit_camera(const ProceduralScene& scene, int index, int count, std::uint64_t split_salt);

// RGBA ground truth: straight color of the covered subsamples and the covered
// fraction as alpha.
Image render_procedural_rgba(const ProceduralScene& scene, const CameraModel& camera);
// Ground truth composited over a background.
Image render_procedural(const ProceduralScene& scene, const CameraModel& camera, const Vec3& background);

struct ProceduralDatasetSpec {
  ProceduralScene scene;
  int n_train = 16;
  int n_test = 4;
  std::vector<int> factors{1, 2, 4, 8};
};

// Writes transforms_{train,test}.json plus PNGs for the base scale, and one
// extra image tree per factor > 1 under d<factor>/. Returns the written paths.
void write_procedural_dataset(const ProceduralDatasetSpec& spec, const std::filesystem::path& out_dir);

// In-memory version of the same dataset (base scale only, RGB over bg).
MultiScaleDataset make_procedural_base(const ProceduralDatasetSpec& spec, const Vec3& background);

}  // namespace mipgrid
