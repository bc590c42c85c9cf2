#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "spmseg/analysis.hpp"
#include "spmseg/parallel.hpp"
#include "spmseg/segment.hpp"

namespace spmseg {

namespace {

double relative(double mean_abs_diff, double clean_mean) {
  if (clean_mean != 0.0) return mean_abs_diff / clean_mean;
  return mean_abs_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<SensitivityRow> noise_sensitivity_study(const std::vector<GrayImage>& clean,
                                                    const std::vector<NamedSegmenter>& methods,
                                                    const std::vector<NoiseCase>& noises, int threads) {
  const std::size_t n = clean.size();
  std::vector<SensitivityRow> rows;
  for (const auto& method : methods) {
    std::vector<MinkowskiTriple> base(n);
    parallel_for(n, threads, [&](std::size_t i) { base[i] = minkowski(method.segment(clean[i])); });
    double mean_area = 0.0;
    double mean_perim = 0.0;
    for (const auto& b : base) {
      mean_area += static_cast<double>(b.area);
      mean_perim += static_cast<double>(b.perimeter);
    }
    if (n > 0) {
      mean_area /= static_cast<double>(n);
      mean_perim /= static_cast<double>(n);
    }

    for (const auto& noise : noises) {
      std::vector<MinkowskiTriple> noisy(n);
      parallel_for(n, threads,
                   [&](std::size_t i) { noisy[i] = minkowski(method.segment(noise.apply(clean[i], i))); });
      double d_euler = 0.0;
      double d_area = 0.0;
      double d_perim = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d_euler += std::abs(static_cast<double>(noisy[i].euler - base[i].euler));
        d_area += std::abs(static_cast<double>(noisy[i].area - base[i].area));
        d_perim += std::abs(static_cast<double>(noisy[i].perimeter - base[i].perimeter));
      }
      SensitivityRow row{method.name, noise.name, 0.0, 0.0, 0.0};
      if (n > 0) {
        const double k = static_cast<double>(n);
        row.euler_mean_abs_diff = d_euler / k;
        row.area_rel_diff = relative(d_area / k, mean_area);
        row.perimeter_rel_diff = relative(d_perim / k, mean_perim);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<RobustnessReport> robustness_study(const std::vector<GrayImage>& images,
                                               const std::vector<NamedSegmenter>& methods,
                                               const std::vector<NoiseCase>& noises, bool rescale,
                                               int threads) {
  std::vector<GrayImage> study;
  if (rescale) {
    study.reserve(images.size() * 4);
    for (const auto& img : images)
      for (auto& q : quadrant_rescale(img)) study.push_back(std::move(q));
  } else {
    study = images;
  }
  const std::size_t n = study.size();

  // Noised images are shared by all methods.
  std::vector<std::vector<GrayImage>> noised(noises.size(), std::vector<GrayImage>(n));
  for (std::size_t k = 0; k < noises.size(); ++k) {
    parallel_for(n, threads, [&](std::size_t i) { noised[k][i] = noises[k].apply(study[i], i); });
  }

  std::vector<RobustnessReport> out;
  for (const auto& method : methods) {
    std::vector<BinaryMask> base(n);
    parallel_for(n, threads, [&](std::size_t i) { base[i] = method.segment(study[i]); });
    for (std::size_t k = 0; k < noises.size(); ++k) {
      RobustnessReport r{method.name, noises[k].name, 0.0, std::vector<double>(n)};
      parallel_for(n, threads, [&](std::size_t i) {
        r.per_image[i] = pixel_change_fraction(method.segment(noised[k][i]), base[i]);
      });
      double sum = 0.0;
      for (double f : r.per_image) sum += f;
      r.mean_fraction = n ? sum / static_cast<double>(n) : 0.0;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<SweepRow> threshold_sweep(const GrayImage& img, const std::vector<int>& thresholds) {
  for (int t : thresholds) {
    if (t < 0 || t > 255) throw ParameterError("sweep threshold " + std::to_string(t) + " is outside [0, 255]");
  }
  std::vector<SweepRow> rows;
  rows.reserve(thresholds.size());
  for (int t : thresholds) rows.push_back({t, minkowski(threshold_fixed(img, t))});
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "threshold,area,perimeter,euler,area_norm,perimeter_norm,euler_norm\n";
  for (const auto& r : rows) {
    out << r.threshold << ',' << r.stats.area << ',' << r.stats.perimeter << ',' << r.stats.euler << ','
        << csv_number(r.stats.area_norm()) << ',' << csv_number(r.stats.perimeter_norm()) << ','
        << csv_number(r.stats.euler_norm()) << '\n';
  }
}

void write_robustness_csv(std::ostream& out, const std::vector<RobustnessReport>& reports) {
  out << "method,noise,images,mean_pixel_change\n";
  for (const auto& r : reports) {
    out << r.method << ',' << r.noise << ',' << r.per_image.size() << ',' << csv_number(r.mean_fraction) << '\n';
  }
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows) {
  out << "method,noise,euler_mean_abs_diff,area_rel_diff,perimeter_rel_diff\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.noise << ',' << csv_number(r.euler_mean_abs_diff) << ',' << csv_number(r.area_rel_diff)
        << ',' << csv_number(r.perimeter_rel_diff) << '\n';
  }
}

}  // namespace spmseg
