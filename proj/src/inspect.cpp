// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/inspect.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mipgrid/error.hpp"
#include "mipgrid/image.hpp"

namespace mipgrid {

namespace {

const char* kAxisNames[3] = {"x", "y", "z"};

struct NamedBank {
  std::string name;
  const MipKernelBank* bank;
};

std::vector<NamedBank> banks_of(const RadianceField& f) {
  std::vector<NamedBank> out;
  if (f.appearance_bank) out.push_back({"appearance", &*f.appearance_bank});
  if (f.density_bank) out.push_back({"density", &*f.density_bank});
  if (f.appearance_bank_b) out.push_back({"appearance_b", &*f.appearance_bank_b});
  if (f.density_bank_b) out.push_back({"density_b", &*f.density_bank_b});
  return out;
}

Image normalized_image(std::span<const double> values, int rows, int cols, double& lo, double& hi) {
  lo = *std::min_element(values.begin(), values.end());
  hi = *std::max_element(values.begin(), values.end());
  Image im = Image::filled(cols, rows, 1, 0.0f);
  const double range = hi - lo;
  for (int i = 0; i < rows * cols; ++i) {
    im.data[i] = range > 0.0 ? static_cast<float>((values[i] - lo) / range) : 0.5f;
  }
  return im;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string kernel_report(const RadianceField& field) {
  std::ostringstream os;
  const auto banks = banks_of(field);
  if (banks.empty()) {
    os << "single-scale model: no kernel banks\n";
    return os.str();
  }
  for (const auto& nb : banks) {
    const MipKernelBank& b = *nb.bank;
    os << "# bank " << nb.name << " family=" << to_string(b.family) << " S=" << b.scales << " K=" << b.kernel_size
       << " R=" << b.rank << "\n";
    os << "# bank scale axis rank " << (b.family == Family::vm ? "moment_1d " : "") << "moment_2d\n";
    for (int s = 0; s < b.scales; ++s) {
      const auto moments = kernel_second_moments(b, s);
      const int per = b.family == Family::vm ? 2 : 1;
      for (int a = 0; a < 3; ++a) {
        for (int r = 0; r < b.rank; ++r) {
          const std::size_t k = (static_cast<std::size_t>(a) * b.rank + r) * per;
          os << nb.name << ' ' << s << ' ' << kAxisNames[a] << ' ' << r;
          for (int j = 0; j < per; ++j) os << ' ' << fmt(moments[k + j].moment);
          os << '\n';
        }
      }
    }
    for (int s = 0; s < b.scales; ++s) {
      os << "mean " << nb.name << " scale " << s << ' ' << fmt(mean_kernel_second_moment(b, s)) << '\n';
    }
  }
  return os.str();
}

std::string inspect_kernels(const RadianceField& field, const std::filesystem::path& out_dir,
                            const InspectOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::ostringstream os;
  os << kernel_report(field);
  os << "# png min max\n";
  for (const auto& nb : banks_of(field)) {
    const MipKernelBank& b = *nb.bank;
    for (int s = 0; s < b.scales; ++s) {
      for (int a = 0; a < 3; ++a) {
        for (int r = 0; r < b.rank; ++r) {
          const std::string stem = nb.name + "_s" + std::to_string(s) + "_" + kAxisNames[a] + "_r" + std::to_string(r);
          double lo = 0, hi = 0;
          if (b.family == Family::vm) {
            const std::string name = stem + "_1d.png";
            write_png(out_dir / name, normalized_image(b.kernel_1d(s, a, r), 1, b.kernel_size, lo, hi));
            os << name << ' ' << fmt(lo) << ' ' << fmt(hi) << '\n';
          }
          const std::string name = stem + "_2d.png";
          write_png(out_dir / name, normalized_image(b.kernel_2d(s, a, r), b.kernel_size, b.kernel_size, lo, hi));
          os << name << ' ' << fmt(lo) << ' ' << fmt(hi) << '\n';
        }
      }
    }
  }
  if (options.grid_slices) {
    // XY slice through the middle of the generated appearance grids, one
    // feature component (rank slice_rank, z-axis vector times XY matrix).
    const FieldSnapshot snap = make_snapshot(field);
    for (std::size_t s = 0; s < snap.appearance.size(); ++s) {
      const FactorGrid& g = snap.appearance[s];
      const int r = std::clamp(options.slice_rank, 0, g.rank - 1);
      const Resolution res = g.res;
      std::vector<double> vals(static_cast<std::size_t>(res.x) * res.y);
      const double zc = 0.0;
      for (int y = 0; y < res.y; ++y) {
        for (int x = 0; x < res.x; ++x) {
          const Vec3 p{2.0 * x / (res.x - 1) - 1.0, 2.0 * y / (res.y - 1) - 1.0, zc};
          const auto f = g.family == Family::vm ? sample_vm(g, p) : sample_planes(g, p);
          // VM features are ordered [axis][rank]; take the z-vector term.
          const std::size_t idx = g.family == Family::vm ? 2 * static_cast<std::size_t>(g.rank) + r : r;
          vals[static_cast<std::size_t>(res.y - 1 - y) * res.x + x] = f[idx];
        }
      }
      double lo = 0, hi = 0;
      const std::string name = "appearance_slice_s" + std::to_string(s) + ".png";
      write_png(out_dir / name, normalized_image(vals, res.y, res.x, lo, hi));
      os << name << ' ' << fmt(lo) << ' ' << fmt(hi) << '\n';
    }
  }
  const std::string text = os.str();
  std::ofstream out(out_dir / "report.txt");
  if (!out) throw IoError("cannot write " + (out_dir / "report.txt").string());
  out << text;
  return text;
}

}  // namespace mipgrid
