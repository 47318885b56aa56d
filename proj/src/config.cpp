// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "mipgrid/error.hpp"

namespace mipgrid {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

std::vector<double> doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& x : split(s, ',')) out.push_back(to_double(x));
  return out;
}

Vec3 vec3(const std::string& s) {
  const auto v = doubles(s);
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() != 3) throw std::invalid_argument("expected 1 or 3 values");
  return {v[0], v[1], v[2]};
}

std::string vec3_text(const Vec3& v) { return fmt(v[0]) + "," + fmt(v[1]) + "," + fmt(v[2]); }

struct Entry {
  const char* key;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

#define MG_INT(KEY, FIELD) \
  Entry{KEY, [](Config& c, const std::string& v) { c.FIELD = static_cast<decltype(c.FIELD)>(to_int(v)); }, \
        [](const Config& c) { return std::to_string(c.FIELD); }}
#define MG_DOUBLE(KEY, FIELD) \
  Entry{KEY, [](Config& c, const std::string& v) { c.FIELD = to_double(v); }, \
        [](const Config& c) { return fmt(c.FIELD); }}
#define MG_BOOL(KEY, FIELD) \
  Entry{KEY, [](Config& c, const std::string& v) { c.FIELD = to_bool(v); }, \
        [](const Config& c) { return std::string(c.FIELD ? "true" : "false"); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{"data.path", [](Config& c, const std::string& v) { c.data_path = v; },
            [](const Config& c) { return c.data_path; }},
      Entry{"data.factors",
            [](Config& c, const std::string& v) {
              c.factors.clear();
              for (const auto& x : split(v, ',')) c.factors.push_back(static_cast<int>(to_int(x)));
            },
            [](const Config& c) { return join(c.factors); }},
      MG_DOUBLE("data.near", near),
      MG_DOUBLE("data.far", far),
      MG_INT("data.max_train", max_train),
      MG_INT("data.max_test", max_test),

      Entry{"model.family", [](Config& c, const std::string& v) { c.model.family = family_from_string(v); },
            [](const Config& c) { return std::string(to_string(c.model.family)); }},
      MG_INT("model.scales", model.scales),
      MG_INT("model.kernel_size", model.kernel_size),
      MG_INT("model.density_rank", model.density_rank),
      MG_INT("model.appearance_rank", model.appearance_rank),
      MG_INT("model.channels", model.channels),
      MG_INT("model.hidden", model.hidden),
      MG_INT("model.resolution", model.resolution),
      MG_DOUBLE("model.box", model.box_half),
      Entry{"model.stdevs", [](Config& c, const std::string& v) { c.model.stdevs = doubles(v); },
            [](const Config& c) { return join(c.model.stdevs); }},
      Entry{"scale_coord.kind",
            [](Config& c, const std::string& v) { c.model.scale_kind = scale_kind_from_string(v); },
            [](const Config& c) { return std::string(to_string(c.model.scale_kind)); }},
      Entry{"scale_coord.anchors", [](Config& c, const std::string& v) { c.model.anchors = doubles(v); },
            [](const Config& c) { return join(c.model.anchors); }},
      MG_BOOL("model.kernels_trainable", model.kernels_trainable),
      MG_DOUBLE("model.init_std", model.init_std),
      MG_DOUBLE("model.density_shift", model.density_shift),

      MG_INT("train.iterations", train.iterations),
      MG_INT("train.batch_rays", train.batch_rays),
      MG_DOUBLE("train.lr_grid", train.lr_grid),
      MG_DOUBLE("train.lr_kernel", train.lr_kernel),
      MG_DOUBLE("train.lr_decoder", train.lr_decoder),
      MG_DOUBLE("train.lr_decay", train.lr_decay),
      Entry{"train.upsample",
            [](Config& c, const std::string& v) {
              c.train.upsample.clear();
              for (const auto& item : split(v, ',')) {
                const auto parts = split(item, ':');
                if (parts.size() != 2) throw std::invalid_argument("expected iteration:resolution, got '" + item + "'");
                c.train.upsample.push_back({static_cast<int>(to_int(parts[0])), static_cast<int>(to_int(parts[1]))});
              }
            },
            [](const Config& c) {
              std::string out;
              for (std::size_t i = 0; i < c.train.upsample.size(); ++i) {
                if (i) out += ',';
                out += std::to_string(c.train.upsample[i].iteration) + ":" +
                       std::to_string(c.train.upsample[i].resolution);
              }
              return out;
            }},
      MG_INT("train.kernel_start", train.kernel_start),
      Entry{"train.scale_weights", [](Config& c, const std::string& v) { c.train.scale_weights = doubles(v); },
            [](const Config& c) { return join(c.train.scale_weights); }},
      Entry{"train.seed",
            [](Config& c, const std::string& v) { c.train.seed = static_cast<std::uint64_t>(to_int(v)); },
            [](const Config& c) { return std::to_string(c.train.seed); }},
      MG_INT("train.threads", train.threads),
      MG_INT("train.eval_every", train.eval_every),
      MG_INT("train.eval_views", train.eval_views),
      MG_INT("train.log_every", train.log_every),

      MG_INT("render.n_samples", render.n_samples),
      Entry{"render.background", [](Config& c, const std::string& v) { c.render.background = vec3(v); },
            [](const Config& c) { return vec3_text(c.render.background); }},
      MG_DOUBLE("render.distance_scale", render.distance_scale),
      MG_DOUBLE("render.weight_threshold", render.weight_threshold),

      MG_DOUBLE("scene.radius", scene.scene.radius),
      MG_DOUBLE("scene.checker_frequency", scene.scene.checker_frequency),
      Entry{"scene.color_a", [](Config& c, const std::string& v) { c.scene.scene.color_a = vec3(v); },
            [](const Config& c) { return vec3_text(c.scene.scene.color_a); }},
      Entry{"scene.color_b", [](Config& c, const std::string& v) { c.scene.scene.color_b = vec3(v); },
            [](const Config& c) { return vec3_text(c.scene.scene.color_b); }},
      MG_DOUBLE("scene.orbit_radius", scene.scene.orbit_radius),
      MG_DOUBLE("scene.camera_angle_x", scene.scene.camera_angle_x),
      MG_INT("scene.width", scene.scene.width),
      MG_INT("scene.height", scene.scene.height),
      MG_INT("scene.supersample", scene.scene.supersample),
      MG_INT("scene.n_train", scene.n_train),
      MG_INT("scene.n_test", scene.n_test),
      Entry{"scene.seed",
            [](Config& c, const std::string& v) { c.scene.scene.seed = static_cast<std::uint64_t>(to_int(v)); },
            [](const Config& c) { return std::to_string(c.scene.scene.seed); }},
  };
  return table;
}

#undef MG_INT
#undef MG_DOUBLE
#undef MG_BOOL

}  // namespace

void set_key(Config& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (key != e.key) continue;
    try {
      e.set(config, value);
    } catch (const std::exception& ex) {
      throw ConfigError("bad value for " + key + ": " + ex.what());
    }
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(Config& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set_key(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

Config parse_config(const std::string& text, Config base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_override(base, line);
  }
  return base;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const Config& config) {
  std::string out;
  for (const auto& e : entries()) out += std::string(e.key) + " = " + e.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.emplace_back(e.key);
  return keys;
}

void validate(const Config& config) {
  try {
    config.model.validate();
    config.train.validate();
    if (config.render.n_samples < 2) throw std::invalid_argument("render.n_samples must be >= 2");
    if (!(config.render.distance_scale > 0.0)) throw std::invalid_argument("render.distance_scale must be positive");
    if (!(config.near > 0.0) || !(config.far > config.near)) throw std::invalid_argument("need 0 < data.near < data.far");
    if (config.factors.empty()) throw std::invalid_argument("data.factors is empty");
    for (int f : config.factors) {
      if (f < 1 || (f & (f - 1)) != 0) throw std::invalid_argument("data.factors must be powers of two");
    }
    if (!config.train.scale_weights.empty() && config.train.scale_weights.size() != config.factors.size()) {
      throw std::invalid_argument("train.scale_weights needs one value per data factor");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace mipgrid
