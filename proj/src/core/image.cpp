#include "spmseg/image.hpp"

#include <algorithm>
#include <cmath>

namespace spmseg {

namespace {

void check_finite(std::span<const double> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DataError("height map value at index " + std::to_string(i) + " is not finite");
    }
  }
}

}  // namespace

HeightMap::HeightMap(int width, int height, double fill) : Grid(width, height, fill) {
  check_finite(data());
}

HeightMap::HeightMap(int width, int height, std::vector<double> data)
    : Grid(width, height, std::move(data)) {
  check_finite(this->data());
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> data)
    : Grid(width, height, std::move(data)) {
  for (auto& v : this->data()) v = v != 0 ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(data().begin(), data().end(), std::uint8_t{1}));
}

GrayImage mask_to_gray(const BinaryMask& m) {
  GrayImage out(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 255 : 0;
  return out;
}

BinaryMask gray_to_mask(const GrayImage& img, int cut) {
  if (cut < 0 || cut > 255) throw ParameterError("mask cut must lie in [0, 255]");
  BinaryMask out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] >= cut ? 1 : 0;
  return out;
}

BinaryMask complement(const BinaryMask& m) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
  return out;
}

}  // namespace spmseg
