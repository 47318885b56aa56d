// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mipgrid/data.hpp"
#include "mipgrid/model_config.hpp"
#include "mipgrid/render.hpp"
#include "mipgrid/train.hpp"

namespace mipgrid {

// Everything a run needs. Text form is one `key = value` per line with
// dotted section prefixes; '#' starts a comment. Lists are comma separated,
// the upsample schedule is `iter:res` pairs.
struct Config {
  std::string data_path;
  std::vector<int> factors{1, 2, 4, 8};
  double near = 2.0;
  double far = 6.0;
  int max_train = 0;
  int max_test = 0;
  ModelConfig model;
  TrainConfig train;
  RenderSettings render;
  ProceduralDatasetSpec scene;
};

// Throws ConfigError naming the key (unknown keys, bad values).
Config parse_config(const std::string& text, Config base = {});
Config load_config(const std::filesystem::path& path);
// Applies one `key=value` override.
void apply_override(Config& config, const std::string& assignment);
void set_key(Config& config, const std::string& key, const std::string& value);
// All keys, in a fixed order; parse_config(to_text(c)) reproduces c.
std::string to_text(const Config& config);
std::vector<std::string> config_keys();

// Cross-field checks (model, train, render); throws ConfigError.
void validate(const Config& config);

}  // namespace mipgrid
