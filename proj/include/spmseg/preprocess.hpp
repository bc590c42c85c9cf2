#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spmseg/image.hpp"

namespace spmseg {

// Outlier exclusion before contrast stretching: pixels further than k
// standard deviations from the mean are pinned to 0/255.
enum class SigmaTruncation { none = 0, one = 1, two = 2, three = 3 };

struct NormalizationPolicy {
  SigmaTruncation truncation = SigmaTruncation::none;
};

SigmaTruncation sigma_truncation_from_int(int k);
int sigma_value(SigmaTruncation t);

struct KMeansConfig {
  int k = 8;
  int max_iters = 50;
  std::uint64_t seed = 0;
  double coord_weight = 1.0;

  void validate() const;
};

struct MeanShiftConfig {
  double bandwidth = 40.0;
  double convergence_tol = 0.5;
  int max_iters = 100;
  std::uint64_t seed = 0;
  // Scale on the (x, y) feature components; 0 clusters on intensity only.
  double coord_weight = 1.0;

  void validate() const;
};

// Median-of-differences line alignment. Each row (after the first) is shifted
// so the median of its element-wise difference with the already corrected
// row above is zero. `columns` aligns columns instead, for data scanned along
// the vertical axis.
HeightMap align_rows(const HeightMap& h, bool columns = false);

// Least-squares removal of the polynomial background spanned by
// {x^a y^b : a + b <= degree}, fitted through a Gram-Schmidt orthonormal
// basis on the pixel grid.
HeightMap detrend_poly(const HeightMap& h, int degree = 3);

// Linear stretch to 0..255 with round-half-up; see SigmaTruncation.
GrayImage normalize_contrast(const HeightMap& h, NormalizationPolicy policy = {});

// Normalized 1D Gaussian weights, length kernel_size, centred.
std::vector<double> gaussian_kernel(int kernel_size, double sigma);

// Separable Gaussian blur with mirrored borders.
GrayImage gaussian_filter(const GrayImage& img, int kernel_size, double sigma);

// Same filter on a floating-point grid (no quantization).
Grid<double> gaussian_filter(const Grid<double>& field, int kernel_size, double sigma);

GrayImage histogram_equalize(const GrayImage& img);

struct KMeansResult {
  GrayImage image;
  std::vector<double> objective;  // sum of squared distances after each assignment
  std::vector<double> centroid_intensity;
  int iterations = 0;
  bool converged = false;
};

KMeansResult kmeans_cluster(const GrayImage& img, const KMeansConfig& cfg);
GrayImage kmeans_quantize(const GrayImage& img, const KMeansConfig& cfg);

struct MeanShiftResult {
  GrayImage image;
  std::vector<double> cluster_intensity;  // mean intensity of each final cluster
  std::vector<int> labels;                // per pixel cluster index
  int trajectories = 0;
  // Non-empty when some trajectory stopped at max_iters instead of converging.
  std::string diagnostics;
};

MeanShiftResult meanshift_cluster(const GrayImage& img, const MeanShiftConfig& cfg);
GrayImage meanshift_quantize(const GrayImage& img, const MeanShiftConfig& cfg);

}  // namespace spmseg
