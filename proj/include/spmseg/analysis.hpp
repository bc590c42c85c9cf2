#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "spmseg/image.hpp"

namespace spmseg {

// Minkowski functionals of a mask whose true pixels are closed unit squares.
// Foreground is 8-connected and holes are 4-connected as a consequence.
struct MinkowskiTriple {
  long long area = 0;       // true pixels
  long long perimeter = 0;  // unit edges between true and false-or-outside
  long long euler = 0;      // V - E + F of the union of squares
  long long total = 0;      // pixel count of the mask

  double area_norm() const { return total ? static_cast<double>(area) / total : 0.0; }
  double perimeter_norm() const { return total ? static_cast<double>(perimeter) / total : 0.0; }
  double euler_norm() const { return total ? static_cast<double>(euler) / total : 0.0; }

  friend bool operator==(const MinkowskiTriple&, const MinkowskiTriple&) = default;
};

MinkowskiTriple minkowski(const BinaryMask& m);

// Fraction of pixels whose label differs. Masks must have equal dimensions.
double pixel_change_fraction(const BinaryMask& a, const BinaryMask& b);

// Top-left, top-right, bottom-left, bottom-right quadrants, each upscaled x2
// (nearest) to the input size. Dimensions must be even.
std::array<GrayImage, 4> quadrant_rescale(const GrayImage& img);

using Segmenter = std::function<BinaryMask(const GrayImage&)>;

struct NamedSegmenter {
  std::string name;
  Segmenter segment;
};

// A noise applied to study image `index`. Must be deterministic in (image, index).
struct NoiseCase {
  std::string name;
  std::function<GrayImage(const GrayImage& img, std::size_t index)> apply;
};

struct SensitivityRow {
  std::string method;
  std::string noise;
  double euler_mean_abs_diff = 0.0;
  // mean |d statistic| / mean statistic over the clean set
  double area_rel_diff = 0.0;
  double perimeter_rel_diff = 0.0;
};

// One row per (method, noise), methods outermost.
std::vector<SensitivityRow> noise_sensitivity_study(const std::vector<GrayImage>& clean,
                                                    const std::vector<NamedSegmenter>& methods,
                                                    const std::vector<NoiseCase>& noises, int threads = 1);

struct RobustnessReport {
  std::string method;
  std::string noise;
  double mean_fraction = 0.0;
  std::vector<double> per_image;  // per study image (per quadrant when rescaled)
};

// Mean pixel-change fraction between the segmentation of each noised image and
// that of its clean original. With `rescale`, every image is first replaced by
// its four rescaled quadrants (quadrant q of image i gets noise index 4i + q).
std::vector<RobustnessReport> robustness_study(const std::vector<GrayImage>& images,
                                               const std::vector<NamedSegmenter>& methods,
                                               const std::vector<NoiseCase>& noises, bool rescale,
                                               int threads = 1);

struct SweepRow {
  int threshold = 0;
  MinkowskiTriple stats;
};

// Thresholds must lie in [0, 255].
std::vector<SweepRow> threshold_sweep(const GrayImage& img, const std::vector<int>& thresholds);

// "%.10g" rendering shared by every CSV writer.
std::string csv_number(double v);

// Comma-separated with a header row and LF line endings.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_robustness_csv(std::ostream& out, const std::vector<RobustnessReport>& reports);
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows);

}  // namespace spmseg
