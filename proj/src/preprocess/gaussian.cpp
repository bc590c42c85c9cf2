#include <cmath>

#include "spmseg/preprocess.hpp"

namespace spmseg {

std::vector<double> gaussian_kernel(int kernel_size, double sigma) {
  if (kernel_size < 3 || kernel_size % 2 == 0) {
    throw ParameterError("gaussian kernel size must be odd and >= 3");
  }
  if (!(sigma > 0.0)) throw ParameterError("gaussian sigma must be positive");
  const int r = kernel_size / 2;
  std::vector<double> k(kernel_size);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + r];
  }
  for (double& x : k) x /= sum;
  return k;
}

Grid<double> gaussian_filter(const Grid<double>& field, int kernel_size, double sigma) {
  const auto k = gaussian_kernel(kernel_size, sigma);
  const int r = kernel_size / 2;
  const int w = field.width();
  const int h = field.height();
  Grid<double> tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * field(reflect_index(x + i, w), y);
      tmp(x, y) = acc;
    }
  }
  Grid<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, reflect_index(y + i, h));
      out(x, y) = acc;
    }
  }
  return out;
}

GrayImage gaussian_filter(const GrayImage& img, int kernel_size, double sigma) {
  Grid<double> field(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) field[i] = img[i];
  const Grid<double> blurred = gaussian_filter(field, kernel_size, sigma);
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = clamp_to_byte(blurred[i]);
  return out;
}

}  // namespace spmseg
