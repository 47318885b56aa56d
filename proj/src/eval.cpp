// Copyright 2026 The mipgrid Authors
// SPDX-License-Identifier: Apache-2.0
#include "mipgrid/eval.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "mipgrid/error.hpp"
#include "mipgrid/metrics.hpp"

namespace mipgrid {

std::string scale_label(int factor) { return factor == 1 ? "full" : "1/" + std::to_string(factor); }

std::vector<EvalSet> test_sets(const MultiScaleDataset& dataset, int max_views) {
  std::vector<EvalSet> sets;
  for (const auto& s : dataset.scales) {
    EvalSet set;
    set.label = scale_label(s.factor);
    const std::size_t n = max_views > 0 ? std::min<std::size_t>(max_views, s.test.size()) : s.test.size();
    set.views.assign(s.test.begin(), s.test.begin() + static_cast<std::ptrdiff_t>(n));
    sets.push_back(std::move(set));
  }
  return sets;
}

EvalReport evaluate(const RadianceField& field, const std::vector<EvalSet>& sets, const RenderSettings& settings,
                    int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const FieldSnapshot snap = make_snapshot(field);
  EvalReport report;
  for (const auto& set : sets) {
    EvalScale sc;
    sc.scale = set.label;
    for (std::size_t i = 0; i < set.views.size(); ++i) {
      const View& v = set.views[i];
      if (v.camera.width != v.image.width || v.camera.height != v.image.height) {
        throw std::invalid_argument("camera resolution " + std::to_string(v.camera.width) + "x" +
                                    std::to_string(v.camera.height) + " does not match image " +
                                    std::to_string(v.image.width) + "x" + std::to_string(v.image.height));
      }
      const Image img = render_image(field, snap, v.camera, settings, threads);
      EvalRow row{set.label, static_cast<int>(i), psnr(img, v.image), ssim(img, v.image)};
      sc.psnr += row.psnr;
      sc.ssim += row.ssim;
      report.rows.push_back(row);
    }
    if (!set.views.empty()) {
      sc.psnr /= set.views.size();
      sc.ssim /= set.views.size();
    }
    report.scales.push_back(sc);
  }
  for (const auto& s : report.scales) {
    report.avg_psnr += s.psnr;
    report.avg_ssim += s.ssim;
  }
  if (!report.scales.empty()) {
    report.avg_psnr /= report.scales.size();
    report.avg_ssim /= report.scales.size();
  }
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(10) << "kind,scale,image,psnr,ssim\n";
  for (const auto& r : report.rows) out << "image," << r.scale << ',' << r.image << ',' << r.psnr << ',' << r.ssim << '\n';
  for (const auto& s : report.scales) out << "scale," << s.scale << ",," << s.psnr << ',' << s.ssim << '\n';
  out << "average,all,," << report.avg_psnr << ',' << report.avg_ssim << '\n';
  out << "wall_clock_s,,," << report.wall_clock_s << ",\n";
  if (!out) throw IoError("failed writing " + path.string());
}

std::string format_eval_table(const EvalReport& report) {
  std::ostringstream os;
  char buf[64];
  auto cell = [&](const std::string& s) {
    std::snprintf(buf, sizeof(buf), " %8s |", s.c_str());
    os << buf;
  };
  auto num = [&](double v, int prec) {
    std::snprintf(buf, sizeof(buf), " %8.*f |", prec, v);
    os << buf;
  };
  os << "| metric |";
  cell("avg");
  for (const auto& s : report.scales) cell(s.scale);
  os << "\n|--------|";
  for (std::size_t i = 0; i <= report.scales.size(); ++i) os << "----------|";
  os << "\n| PSNR   |";
  num(report.avg_psnr, 2);
  for (const auto& s : report.scales) num(s.psnr, 2);
  os << "\n| SSIM   |";
  num(report.avg_ssim, 4);
  for (const auto& s : report.scales) num(s.ssim, 4);
  os << "\n| LPIPS  |";
  for (std::size_t i = 0; i <= report.scales.size(); ++i) cell("n/a");
  os << "\n";
  return os.str();
}

}  // namespace mipgrid
