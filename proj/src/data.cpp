// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/data.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "mipgrid/error.hpp"
#include "mipgrid/render.hpp"

namespace mipgrid {

namespace fs = std::filesystem;
using nlohmann::json;

double focal_from_camera_angle(double camera_angle_x, int width) {
  if (!(camera_angle_x > 0.0 && camera_angle_x < std::numbers::pi)) {
    throw std::invalid_argument("camera_angle_x must lie in (0, pi)");
  }
  return 0.5 * width / std::tan(0.5 * camera_angle_x);
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

fs::path frame_image_path(const fs::path& dir, std::string file_path) {
  fs::path p = dir / file_path;
  if (!p.has_extension()) p += ".png";
  return p.lexically_normal();
}

std::vector<View> load_split(const fs::path& dir, const std::string& split, const BlenderLoadOptions& options,
                             int max_frames) {
  const fs::path json_path = dir / ("transforms_" + split + ".json");
  const json doc = read_json(json_path);
  std::vector<View> views;
  try {
    const double angle = doc.at("camera_angle_x").get<double>();
    const float bg[3] = {static_cast<float>(options.background[0]), static_cast<float>(options.background[1]),
                         static_cast<float>(options.background[2])};
    for (const auto& frame : doc.at("frames")) {
      if (max_frames > 0 && static_cast<int>(views.size()) >= max_frames) break;
      View view;
      view.file_path = frame.at("file_path").get<std::string>();
      const fs::path image_path = frame_image_path(dir, view.file_path);
      const Image rgba = read_png(image_path);
      if (rgba.channels != 4) throw IoError("expected an RGBA image: " + image_path.string());
      view.image = composite_over(rgba, bg);

      const auto& m = frame.at("transform_matrix");
      if (m.size() != 4) throw IoError("transform_matrix must be 4x4 in " + json_path.string());
      for (int r = 0; r < 4; ++r) {
        if (m[r].size() != 4) throw IoError("transform_matrix must be 4x4 in " + json_path.string());
        for (int c = 0; c < 4; ++c) view.camera.camera_to_world[r * 4 + c] = m[r][c].get<double>();
      }
      const double focal = focal_from_camera_angle(angle, rgba.width);
      view.camera.focal_x = focal;
      view.camera.focal_y = focal;
      view.camera.width = rgba.width;
      view.camera.height = rgba.height;
      view.camera.cx = 0.5 * rgba.width;
      view.camera.cy = 0.5 * rgba.height;
      view.camera.near = options.near;
      view.camera.far = options.far;
      view.camera.validate();
      views.push_back(std::move(view));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + json_path.string() + ": " + e.what());
  }
  return views;
}

}  // namespace

MultiScaleDataset load_blender(const fs::path& dir, const BlenderLoadOptions& options) {
  for (const char* name : {"transforms_train.json", "transforms_test.json"}) {
    if (!fs::exists(dir / name)) throw IoError("missing file " + (dir / name).string());
  }
  MultiScaleDataset ds;
  MultiScaleDataset::Scale base;
  base.factor = 1;
  base.train = load_split(dir, "train", options, options.max_train);
  base.test = load_split(dir, "test", options, options.max_test);
  ds.scales.push_back(std::move(base));
  return ds;
}

CameraModel downscale_camera(const CameraModel& camera, int factor) {
  if (factor < 1) throw std::invalid_argument("downscale factor must be positive");
  if (camera.width % factor != 0 || camera.height % factor != 0) {
    throw std::invalid_argument("camera size " + std::to_string(camera.width) + "x" + std::to_string(camera.height) +
                                " is not divisible by " + std::to_string(factor));
  }
  CameraModel out = camera;
  out.width = camera.width / factor;
  out.height = camera.height / factor;
  out.focal_x = camera.focal_x / factor;
  out.focal_y = camera.focal_y / factor;
  out.cx = camera.cx / factor;
  out.cy = camera.cy / factor;
  return out;
}

MultiScaleDataset make_multiscale(const MultiScaleDataset& base, std::span<const int> factors) {
  if (base.scales.empty()) throw std::invalid_argument("empty base dataset");
  const auto& src = base.base();
  MultiScaleDataset out;
  for (int f : factors) {
    MultiScaleDataset::Scale scale;
    scale.factor = f;
    auto convert = [f](const std::vector<View>& views) {
      std::vector<View> res;
      res.reserve(views.size());
      for (const View& v : views) {
        View d;
        d.file_path = v.file_path;
        d.camera = downscale_camera(v.camera, f);
        d.image = f == 1 ? v.image : downsample(v.image, f);
        res.push_back(std::move(d));
      }
      return res;
    };
    scale.train = convert(src.train);
    scale.test = convert(src.test);
    out.scales.push_back(std::move(scale));
  }
  return out;
}

std::optional<double> intersect_sphere(const ProceduralScene& scene, const Vec3& origin, const Vec3& dir) {
  // |o + t d - c|^2 = r^2 with |d| = 1
  const Vec3 oc = origin - scene.center;
  const double b = dot(oc, dir);
  const double c = dot(oc, oc) - scene.radius * scene.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  if (t0 > 0.0) return t0;
  const double t1 = -b + s;
  if (t1 > 0.0) return t1;
  return std::nullopt;
}

Vec3 checker_color(const ProceduralScene& scene, const Vec3& point) {
  const double f = scene.checker_frequency;
  const long long k = static_cast<long long>(std::floor(f * point[0])) +
                      static_cast<long long>(std::floor(f * point[1])) +
                      static_cast<long long>(std::floor(f * point[2]));
  return (k & 1) == 0 ? scene.color_a : scene.color_b;
}

CameraModel orbit_camera(const ProceduralScene& scene, int index, int count, std::uint64_t split_salt) {
  if (count < 1 || index < 0 || index >= count) throw std::out_of_range("orbit camera index out of range");
  Rng rng(mix_seed(scene.seed, split_salt));
  const double phase = 2.0 * std::numbers::pi * rng.uniform();
  // Fibonacci lattice in elevation, kept away from the poles so the z-up
  // look_at stays well conditioned.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - 2.0 * (index + 0.5) / count;
  const double elev = std::asin(z * std::sin(70.0 * std::numbers::pi / 180.0));
  const double az = phase + golden * index;
  const Vec3 eye = scene.center + scene.orbit_radius * Vec3{std::cos(elev) * std::cos(az),
                                                            std::cos(elev) * std::sin(az), std::sin(elev)};
  CameraModel cam;
  cam.width = scene.width;
  cam.height = scene.height;
  cam.focal_x = cam.focal_y = focal_from_camera_angle(scene.camera_angle_x, scene.width);
  cam.cx = 0.5 * scene.width;
  cam.cy = 0.5 * scene.height;
  cam.camera_to_world = look_at(eye, scene.center, {0.0, 0.0, 1.0});
  cam.near = scene.near;
  cam.far = scene.far;
  return cam;
}

namespace {

// Sum of covered subsample colors and the covered count for one pixel.
void shade_pixel(const ProceduralScene& scene, const CameraModel& cam, int px, int py, Vec3& sum, int& hits) {
  const int n = scene.supersample;
  const Mat4& m = cam.camera_to_world;
  const Vec3 origin = cam.origin();
  sum = {0.0, 0.0, 0.0};
  hits = 0;
  for (int sy = 0; sy < n; ++sy) {
    for (int sx = 0; sx < n; ++sx) {
      const double u = px + (sx + 0.5) / n;
      const double v = py + (sy + 0.5) / n;
      const Vec3 d_cam{(u - cam.cx) / cam.focal_x, -(v - cam.cy) / cam.focal_y, -1.0};
      const Vec3 d = normalized({m[0] * d_cam[0] + m[1] * d_cam[1] + m[2] * d_cam[2],
                                 m[4] * d_cam[0] + m[5] * d_cam[1] + m[6] * d_cam[2],
                                 m[8] * d_cam[0] + m[9] * d_cam[1] + m[10] * d_cam[2]});
      const auto t = intersect_sphere(scene, origin, d);
      if (!t) continue;
      sum = sum + checker_color(scene, origin + *t * d);
      ++hits;
    }
  }
}

}  // namespace

Image render_procedural_rgba(const ProceduralScene& scene, const CameraModel& camera) {
  if (scene.supersample < 1) throw std::invalid_argument("supersample must be >= 1");
  camera.validate();
  Image out = Image::filled(camera.width, camera.height, 4, 0.0f);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      Vec3 sum;
      int hits = 0;
      shade_pixel(scene, camera, x, y, sum, hits);
      if (hits == 0) continue;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(sum[c] / hits);
      out.at(x, y, 3) = static_cast<float>(hits) / static_cast<float>(scene.supersample * scene.supersample);
    }
  }
  return out;
}

Image render_procedural(const ProceduralScene& scene, const CameraModel& camera, const Vec3& background) {
  if (scene.supersample < 1) throw std::invalid_argument("supersample must be >= 1");
  camera.validate();
  const double n2 = static_cast<double>(scene.supersample) * scene.supersample;
  Image out = Image::filled(camera.width, camera.height, 3, 0.0f);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      Vec3 sum;
      int hits = 0;
      shade_pixel(scene, camera, x, y, sum, hits);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>((sum[c] + (n2 - hits) * background[c]) / n2);
    }
  }
  return out;
}

namespace {

constexpr std::uint64_t kTrainSalt = 0x7472;
constexpr std::uint64_t kTestSalt = 0x7465;

json pose_json(const Mat4& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m[r * 4], m[r * 4 + 1], m[r * 4 + 2], m[r * 4 + 3]});
  return rows;
}

// Premultiplied box average of straight RGBA, returned as straight RGBA.
Image downsample_rgba(const Image& rgba, int factor) {
  Image pre = rgba;
  for (std::size_t p = 0; p < pre.data.size() / 4; ++p) {
    for (int c = 0; c < 3; ++c) pre.data[p * 4 + c] *= pre.data[p * 4 + 3];
  }
  Image d = downsample(pre, factor);
  for (std::size_t p = 0; p < d.data.size() / 4; ++p) {
    const float a = d.data[p * 4 + 3];
    for (int c = 0; c < 3; ++c) d.data[p * 4 + c] = a > 0.0f ? d.data[p * 4 + c] / a : 0.0f;
  }
  return d;
}

void write_split(const ProceduralDatasetSpec& spec, const fs::path& out_dir, const std::string& split, int count,
                 std::uint64_t salt) {
  std::vector<Image> images;
  std::vector<CameraModel> cams;
  for (int i = 0; i < count; ++i) {
    cams.push_back(orbit_camera(spec.scene, i, count, salt));
    images.push_back(render_procedural_rgba(spec.scene, cams.back()));
  }
  for (int f : spec.factors) {
    const fs::path root = f == 1 ? out_dir : out_dir / ("d" + std::to_string(f));
    std::error_code ec;
    fs::create_directories(root / split, ec);
    if (ec) throw IoError("cannot create " + (root / split).string() + ": " + ec.message());
    json doc;
    doc["camera_angle_x"] = spec.scene.camera_angle_x;
    doc["frames"] = json::array();
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "r_%03d", i);
      const std::string rel = "./" + split + "/" + name;
      write_png(root / split / (std::string(name) + ".png"), f == 1 ? images[i] : downsample_rgba(images[i], f));
      doc["frames"].push_back({{"file_path", rel}, {"transform_matrix", pose_json(cams[i].camera_to_world)}});
    }
    const fs::path json_path = root / ("transforms_" + split + ".json");
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot write " + json_path.string());
    out << doc.dump(2) << '\n';
  }
}

}  // namespace

void write_procedural_dataset(const ProceduralDatasetSpec& spec, const fs::path& out_dir) {
  for (int f : spec.factors) {
    if (spec.scene.width % f != 0 || spec.scene.height % f != 0 || f < 1 || (f & (f - 1)) != 0) {
      throw std::invalid_argument("factor " + std::to_string(f) + " does not divide the base image size");
    }
  }
  write_split(spec, out_dir, "train", spec.n_train, kTrainSalt);
  write_split(spec, out_dir, "test", spec.n_test, kTestSalt);
}

MultiScaleDataset make_procedural_base(const ProceduralDatasetSpec& spec, const Vec3& background) {
  MultiScaleDataset ds;
  MultiScaleDataset::Scale base;
  base.factor = 1;
  auto make = [&](int count, std::uint64_t salt, std::vector<View>& views) {
    for (int i = 0; i < count; ++i) {
      View v;
      v.camera = orbit_camera(spec.scene, i, count, salt);
      v.image = render_procedural(spec.scene, v.camera, background);
      char name[32];
      std::snprintf(name, sizeof(name), "r_%03d", i);
      v.file_path = name;
      views.push_back(std::move(v));
    }
  };
  make(spec.n_train, kTrainSalt, base.train);
  make(spec.n_test, kTestSalt, base.test);
  ds.scales.push_back(std::move(base));
  return ds;
}

}  // namespace mipgrid
