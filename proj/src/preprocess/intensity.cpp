#include <algorithm>
#include <array>
#include <cmath>

#include "spmseg/preprocess.hpp"

namespace spmseg {

SigmaTruncation sigma_truncation_from_int(int k) {
  switch (k) {
    case 0: return SigmaTruncation::none;
    case 1: return SigmaTruncation::one;
    case 2: return SigmaTruncation::two;
    case 3: return SigmaTruncation::three;
    default:
      throw ParameterError("sigma truncation must be one of 0 (none), 1, 2, 3; got " +
                           std::to_string(k));
  }
}

int sigma_value(SigmaTruncation t) { return static_cast<int>(t); }

GrayImage normalize_contrast(const HeightMap& h, NormalizationPolicy policy) {
  GrayImage out(h.width(), h.height());
  if (h.empty()) return out;
  const auto data = h.data();
  const double n = static_cast<double>(data.size());

  double lo_cut = -INFINITY;
  double hi_cut = INFINITY;
  if (policy.truncation != SigmaTruncation::none) {
    double mean = 0.0;
    for (double v : data) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : data) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    const double k = sigma_value(policy.truncation);
    lo_cut = mean - k * sd;
    hi_cut = mean + k * sd;
  }

  double lo = INFINITY;
  double hi = -INFINITY;
  for (double v : data) {
    if (v < lo_cut || v > hi_cut) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const bool degenerate = !(hi > lo);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = data[i];
    if (v < lo_cut) {
      out[i] = 0;
    } else if (v > hi_cut) {
      out[i] = 255;
    } else if (degenerate) {
      out[i] = 0;
    } else {
      out[i] = static_cast<std::uint8_t>(std::min(255.0, std::floor((v - lo) * 255.0 / (hi - lo) + 0.5)));
    }
  }
  return out;
}

GrayImage histogram_equalize(const GrayImage& img) {
  std::array<std::size_t, 256> hist{};
  for (auto v : img.data()) ++hist[v];
  std::array<std::size_t, 256> cdf{};
  std::size_t run = 0;
  for (int v = 0; v < 256; ++v) {
    run += hist[v];
    cdf[v] = run;
  }
  const std::size_t total = img.size();
  std::size_t cdf_min = 0;
  for (int v = 0; v < 256; ++v) {
    if (hist[v] != 0) {
      cdf_min = cdf[v];
      break;
    }
  }
  if (total == cdf_min) return img;  // constant (or empty) image

  std::array<std::uint8_t, 256> lut{};
  const double denom = static_cast<double>(total - cdf_min);
  for (int v = 0; v < 256; ++v) {
    const double c = cdf[v] < cdf_min ? 0.0 : static_cast<double>(cdf[v] - cdf_min);
    lut[v] = clamp_to_byte(255.0 * c / denom);
  }
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = lut[img[i]];
  return out;
}

}  // namespace spmseg
