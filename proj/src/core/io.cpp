#include "spmseg/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "raster.hpp"

namespace spmseg {

namespace {

detail::Raster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() < 4) throw DataError(path.string() + ": file too short to be an image");
  in.close();

  const auto b = [&](int i) { return static_cast<unsigned char>(magic[i]); };
  if (b(0) == 0x89 && b(1) == 'P' && b(2) == 'N' && b(3) == 'G') return detail::read_png(path);
  if ((b(0) == 'I' && b(1) == 'I') || (b(0) == 'M' && b(1) == 'M')) return detail::read_tiff(path);
  throw DataError(path.string() + ": unsupported file format (expected PNG or TIFF)");
}

// Rec.601 luminance collapse, kept in floating point.
std::vector<double> luminance(const detail::Raster& r) {
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  std::vector<double> out(n);
  if (r.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = r.samples[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto* px = &r.samples[3 * i];
      out[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
  }
  return out;
}

}  // namespace

GrayImage load_gray(const std::filesystem::path& path) {
  const detail::Raster r = read_raster(path);
  const std::vector<double> lum = luminance(r);
  GrayImage out(r.width, r.height);
  if (r.bits == 8) {
    for (std::size_t i = 0; i < lum.size(); ++i) out[i] = clamp_to_byte(lum[i]);
    return out;
  }
  const auto [lo, hi] = std::minmax_element(lum.begin(), lum.end());
  if (lo == lum.end() || *hi <= *lo) return out;  // degenerate range -> all 0
  const double scale = 255.0 / (*hi - *lo);
  for (std::size_t i = 0; i < lum.size(); ++i) out[i] = clamp_to_byte((lum[i] - *lo) * scale);
  return out;
}

void write_gray(const GrayImage& img, const std::filesystem::path& path) {
  detail::write_png_gray8(path, img.width(), img.height(), img.data().data());
}

HeightMap load_height(const std::filesystem::path& path) {
  const detail::Raster r = read_raster(path);
  return HeightMap(r.width, r.height, luminance(r));
}

BinaryMask load_mask(const std::filesystem::path& path) {
  return gray_to_mask(load_gray(path), 128);
}

void write_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  write_gray(mask_to_gray(mask), path);
}

}  // namespace spmseg
