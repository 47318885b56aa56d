// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
//
// Metrics, config, checkpoints, evaluation and the command-line tool.
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mipgrid/checkpoint.hpp"
#include "mipgrid/config.hpp"
#include "mipgrid/error.hpp"
#include "mipgrid/eval.hpp"
#include "mipgrid/inspect.hpp"
#include "mipgrid/metrics.hpp"
#include "tiny_model.hpp"

using namespace mipgrid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mipgrid_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Exit status of the CLI with the given arguments; output is discarded.
int cli(const std::string& args) {
  const std::string cmd = std::string(MIPGRID_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* kTinyScene =
    "scene.width = 16\nscene.height = 16\nscene.n_train = 2\nscene.n_test = 1\nscene.supersample = 2\n"
    "data.factors = 1,2\n";

}  // namespace

TEST_CASE("image metrics") {
  SUBCASE("psnr from mse") {
    const Image a = Image::filled(8, 8, 3, 0.5f);
    Image b = a;
    for (float& v : b.data) v = 0.6f;
    CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
    CHECK(psnr_from_mse(1e-3) == doctest::Approx(30.0).epsilon(1e-12));
  }
  SUBCASE("identical images") {
    const Image a = Image::filled(16, 16, 3, 0.25f);
    CHECK(psnr(a, a) == kPsnrCap);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant images reduce SSIM to the luminance term") {
    const Image a = Image::filled(16, 16, 3, 0.5f);
    const Image b = Image::filled(16, 16, 3, 0.6f);
    const double c1 = 0.01 * 0.01;
    const double mx = 0.5, my = double(0.6f);
    const double expected = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
    CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(ssim(a, b) < 1.0);
  }
  SUBCASE("small images use a smaller window") {
    const Image a = Image::filled(5, 4, 3, 0.5f);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("structure lowers SSIM") {
    Image a = Image::filled(16, 16, 1, 0.0f);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) a.at(x, y, 0) = ((x / 2 + y / 2) % 2) ? 1.0f : 0.0f;
    }
    const Image flat = Image::filled(16, 16, 1, 0.5f);
    CHECK(ssim(a, flat) < 0.1);
  }
  SUBCASE("size mismatch") { CHECK_THROWS(mse(Image::filled(2, 2, 3, 0.f), Image::filled(2, 3, 3, 0.f))); }
}

TEST_CASE("config text") {
  SUBCASE("round trip") {
    Config c;
    c.data_path = "/tmp/x";
    c.model.family = Family::planes;
    c.model.scale_kind = ScaleKind::two_d;
    c.model.anchors = {0.01, 0.02, 0.04, 0.08};
    c.train.upsample = {{100, 48}, {200, 64}};
    c.train.lr_grid = 0.0123456789012345;
    const Config back = parse_config(to_text(c));
    CHECK(to_text(back) == to_text(c));
    CHECK(back.model.anchors == c.model.anchors);
    CHECK(back.train.lr_grid == c.train.lr_grid);
    CHECK(back.train.upsample.size() == 2);
    CHECK(back.train.upsample[1].resolution == 64);
  }
  SUBCASE("comments, blanks and overrides") {
    Config c = parse_config("# comment\n\nmodel.scales = 1  # trailing\nscale_coord.kind = cont\n");
    CHECK(c.model.scales == 1);
    CHECK(c.model.scale_kind == ScaleKind::continuous);
    apply_override(c, "train.iterations=7");
    CHECK(c.train.iterations == 7);
  }
  SUBCASE("errors name the key") {
    try {
      parse_config("model.bogus = 3\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("model.bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("train.iterations = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("scale_coord.kind = 3d\n"), ConfigError);
    Config c;
    c.model.anchors = {0.1, 0.2};
    CHECK_THROWS_AS(validate(c), ConfigError);
  }
  SUBCASE("every key is listed once") {
    const auto keys = config_keys();
    std::set<std::string> unique(keys.begin(), keys.end());
    CHECK(unique.size() == keys.size());
    CHECK(unique.count("scale_coord.anchors") == 1);
  }
}

TEST_CASE("checkpoints") {
  using mipgrid::testing::flat;
  using mipgrid::testing::tiny_field;
  Checkpoint ck;
  ck.field = tiny_field(Family::vm, ScaleKind::two_d, 3);
  ck.config_text = "model.scales = 3\n";
  ck.rng_state = "12345";
  ck.iteration = 99;

  SUBCASE("f64 round trip is exact") {
    const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(ck));
    CHECK(flat(back.field) == flat(ck.field));
    CHECK(back.field.index_map.anchors() == ck.field.index_map.anchors());
    CHECK(back.field.distance_map.anchors() == ck.field.distance_map.anchors());
    CHECK(back.field.density_shift == ck.field.density_shift);
    CHECK(back.config_text == ck.config_text);
    CHECK(back.rng_state == ck.rng_state);
    CHECK(back.iteration == 99);
  }
  SUBCASE("f32 round trip is close") {
    const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(ck, DType::f32));
    const auto a = flat(back.field), b = flat(ck.field);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a[i].size(); ++j) CHECK(a[i][j] == doctest::Approx(b[i][j]).epsilon(1e-6));
    }
  }
  SUBCASE("bad bytes") {
    auto bytes = serialize_checkpoint(ck);
    auto wrong_version = bytes;
    wrong_version[4] = 7;
    CHECK_THROWS_AS(deserialize_checkpoint(wrong_version), IoError);
    auto wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(wrong_magic), IoError);
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), IoError);
  }
  SUBCASE("file round trip") {
    const fs::path dir = fresh_dir("ckpt");
    save_checkpoint(dir / "m.ckpt", ck);
    CHECK(flat(load_checkpoint(dir / "m.ckpt").field) == flat(ck.field));
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
    fs::remove_all(dir);
  }
}

TEST_CASE("evaluation and inspection") {
  using mipgrid::testing::tiny_field;
  ProceduralDatasetSpec spec;
  spec.scene.width = spec.scene.height = 8;
  spec.scene.supersample = 2;
  spec.n_train = 1;
  spec.n_test = 2;
  const std::vector<int> factors{1, 2};
  const MultiScaleDataset ds = make_multiscale(make_procedural_base(spec, {0.0, 0.0, 0.0}), factors);
  const RadianceField f = tiny_field(Family::vm, ScaleKind::discrete);
  RenderSettings rs;
  rs.n_samples = 8;
  rs.background = {0.0, 0.0, 0.0};

  SUBCASE("report averages") {
    const EvalReport r = evaluate(f, test_sets(ds), rs);
    REQUIRE(r.scales.size() == 2);
    CHECK(r.rows.size() == 4);
    CHECK(r.scales[1].scale == scale_label(2));
    CHECK(r.scales[0].psnr == doctest::Approx(0.5 * (r.rows[0].psnr + r.rows[1].psnr)).epsilon(1e-12));
    CHECK(r.avg_psnr == doctest::Approx(0.5 * (r.scales[0].psnr + r.scales[1].psnr)).epsilon(1e-12));
    CHECK(r.avg_ssim == doctest::Approx(0.5 * (r.scales[0].ssim + r.scales[1].ssim)).epsilon(1e-12));
    const std::vector<double> direct = eval_psnr(f, ds, rs, 0, 1);
    CHECK(direct[1] == doctest::Approx(r.scales[1].psnr).epsilon(1e-12));
    const std::string table = format_eval_table(r);
    CHECK(table.find("LPIPS") != std::string::npos);
    CHECK(table.find("n/a") != std::string::npos);
  }
  SUBCASE("mismatched views are rejected") {
    auto sets = test_sets(ds);
    sets[0].views[0].camera.width = 9;
    CHECK_THROWS_AS(evaluate(f, sets, rs), std::invalid_argument);
  }
  SUBCASE("kernel report lists every kernel") {
    const std::string report = kernel_report(f);
    std::istringstream in(report);
    std::string line;
    int entries = 0;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#' && line.rfind("mean", 0) != 0) ++entries;
    }
    CHECK(entries == 2 * 2 * 3 * 2);  // banks x scales x axes x rank
    RadianceField single = f;
    single.density_bank.reset();
    single.appearance_bank.reset();
    CHECK(kernel_report(single).find("single-scale") != std::string::npos);
  }
}

TEST_CASE("command-line tool") {
  const fs::path dir = fresh_dir("tool");
  std::ofstream(dir / "scene.cfg") << kTinyScene;

  SUBCASE("usage errors exit with 2") {
    CHECK(cli("") == 2);
    CHECK(cli("bogus") == 2);
    CHECK(cli("train --out " + (dir / "run").string()) == 2);  // no data.path
    CHECK(cli("train --out " + (dir / "run").string() + " --set data.path=" + (dir / "nope").string()) == 2);
    CHECK(cli("train --set model.bogus=1 --out " + (dir / "run").string()) == 2);
  }
  SUBCASE("gen-data is deterministic") {
    REQUIRE(cli("gen-data --config " + (dir / "scene.cfg").string() + " --out " + (dir / "a").string()) == 0);
    REQUIRE(cli("gen-data --config " + (dir / "scene.cfg").string() + " --out " + (dir / "b").string()) == 0);
    for (const char* rel : {"transforms_train.json", "train/r_001.png", "test/r_000.png", "d2/train/r_000.png"}) {
      INFO(rel);
      REQUIRE(fs::exists(dir / "a" / rel));
      CHECK(slurp(dir / "a" / rel) == slurp(dir / "b" / rel));
    }
  }
  SUBCASE("train, eval, render, inspect") {
    REQUIRE(cli("gen-data --config " + (dir / "scene.cfg").string() + " --out " + (dir / "data").string()) == 0);
    const std::string common = " --config " + (dir / "scene.cfg").string() + " --set data.path=" +
                               (dir / "data").string() +
                               " --set model.resolution=6 --set model.appearance_rank=2 --set model.density_rank=2"
                               " --set model.channels=4 --set model.hidden=8 --set render.n_samples=8"
                               " --set model.scales=2 --set model.stdevs=1,1.5";
    REQUIRE(cli("train" + common + " --set train.iterations=3 --set train.batch_rays=32 --out " +
                (dir / "run").string()) == 0);
    CHECK(fs::exists(dir / "run" / "model.ckpt"));
    CHECK(fs::exists(dir / "run" / "metrics.csv"));
    const std::string ckpt = (dir / "run" / "model.ckpt").string();
    CHECK(cli("eval --checkpoint " + ckpt + " --out " + (dir / "eval").string()) == 0);
    CHECK(cli("render --checkpoint " + ckpt + " --factor 8/3 --view 0 --out " + (dir / "r").string()) == 0);
    CHECK(cli("render --checkpoint " + ckpt + " --factor 0 --out " + (dir / "r").string()) == 2);
    CHECK(cli("render --checkpoint " + ckpt + " --distance-value 3 --out " + (dir / "r").string()) == 2);
    CHECK(cli("render --checkpoint " + ckpt + " --view 99 --out " + (dir / "r").string()) == 2);
    CHECK(cli("inspect-kernels --checkpoint " + ckpt + " --out " + (dir / "k").string()) == 0);
    CHECK(fs::exists(dir / "k" / "report.txt"));
    CHECK(cli("inspect-kernels --checkpoint " + (dir / "missing.ckpt").string() + " --out " + (dir / "k").string()) ==
          3);
  }
  SUBCASE("zero iterations still writes a checkpoint") {
    REQUIRE(cli("gen-data --config " + (dir / "scene.cfg").string() + " --out " + (dir / "data").string()) == 0);
    CHECK(cli("train --config " + (dir / "scene.cfg").string() + " --set data.path=" + (dir / "data").string() +
              " --set model.resolution=4 --set model.scales=1 --set train.iterations=0 --out " +
              (dir / "zero").string()) == 0);
    CHECK(fs::exists(dir / "zero" / "model.ckpt"));
  }
  fs::remove_all(dir);
}
