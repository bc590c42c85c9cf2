#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spmseg/error.hpp"

namespace spmseg {

// Row-major 2D grid with a top-left origin: x grows rightward, y downward.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * height) {
      throw ParameterError("grid data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator()(int x, int y) { return data_[index(x, y)]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  std::span<const T> row(int y) const {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
  }
  std::span<T> row(int y) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
  }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 protected:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

 private:
  static void check_dims(int width, int height) {
    if (width < 0 || height < 0) {
      throw ParameterError("negative grid dimensions");
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Raw scan heights, arbitrary units. Every value is finite.
class HeightMap : public Grid<double> {
 public:
  HeightMap() = default;
  HeightMap(int width, int height, double fill = 0.0);
  HeightMap(int width, int height, std::vector<double> data);
};

// 8-bit gray-scale working image.
class GrayImage : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;
};

// Segmentation output: 1 = foreground (nanoparticle), 0 = substrate.
class BinaryMask : public Grid<std::uint8_t> {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : Grid(width, height, static_cast<std::uint8_t>(fill)) {}
  // Any nonzero entry is stored as 1.
  BinaryMask(int width, int height, std::vector<std::uint8_t> data);

  bool fg(int x, int y) const { return (*this)(x, y) != 0; }
  void set(int x, int y, bool v) { (*this)(x, y) = v ? 1 : 0; }
  std::size_t count() const;
};

GrayImage mask_to_gray(const BinaryMask& m);
// pixel >= cut is foreground.
BinaryMask gray_to_mask(const GrayImage& img, int cut);
BinaryMask complement(const BinaryMask& m);

// Symmetric (edge-duplicating) reflection of an arbitrary index into [0, n).
// Used as the mirror border for every windowed operation.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int r = i % period;
  if (r < 0) r += period;
  return r < n ? r : period - 1 - r;
}

inline std::uint8_t clamp_to_byte(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v + 0.5);
}

// Geometric helpers shared across modules. G is any Grid-derived type
// constructible from (width, height, data).
template <typename G>
G flip_horizontal(const G& g) {
  std::vector<typename G::value_type> out(g.size());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      out[static_cast<std::size_t>(y) * g.width() + x] = g(g.width() - 1 - x, y);
  return G(g.width(), g.height(), std::move(out));
}

template <typename G>
G flip_vertical(const G& g) {
  std::vector<typename G::value_type> out(g.size());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      out[static_cast<std::size_t>(y) * g.width() + x] = g(x, g.height() - 1 - y);
  return G(g.width(), g.height(), std::move(out));
}

// Quarter turn clockwise.
template <typename G>
G rotate90(const G& g) {
  const int w = g.height();
  const int h = g.width();
  std::vector<typename G::value_type> out(g.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out[static_cast<std::size_t>(y) * w + x] = g(y, g.height() - 1 - x);
  return G(w, h, std::move(out));
}

template <typename G>
G transpose(const G& g) {
  std::vector<typename G::value_type> out(g.size());
  for (int y = 0; y < g.width(); ++y)
    for (int x = 0; x < g.height(); ++x)
      out[static_cast<std::size_t>(y) * g.height() + x] = g(y, x);
  return G(g.height(), g.width(), std::move(out));
}

// Nearest-neighbour resampling; source pixel = floor((dst + 0.5) * src / dst).
template <typename G>
G resize_nearest(const G& g, int width, int height) {
  if (width <= 0 || height <= 0) throw ParameterError("resize to empty grid");
  if (g.empty()) throw ParameterError("resize of empty grid");
  std::vector<typename G::value_type> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>((static_cast<long long>(2 * y + 1) * g.height()) / (2LL * height));
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>((static_cast<long long>(2 * x + 1) * g.width()) / (2LL * width));
      out[static_cast<std::size_t>(y) * width + x] = g(sx, sy);
    }
  }
  return G(width, height, std::move(out));
}

template <typename G>
G crop(const G& g, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width < 0 || height < 0 || x0 + width > g.width() ||
      y0 + height > g.height()) {
    throw ParameterError("crop rectangle outside grid");
  }
  std::vector<typename G::value_type> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out[static_cast<std::size_t>(y) * width + x] = g(x0 + x, y0 + y);
  return G(width, height, std::move(out));
}

}  // namespace spmseg
