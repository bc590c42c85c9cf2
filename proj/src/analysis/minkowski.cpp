#include "spmseg/analysis.hpp"

namespace spmseg {

MinkowskiTriple minkowski(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  auto fg = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && m(x, y) != 0; };

  MinkowskiTriple t;
  t.total = static_cast<long long>(w) * h;
  long long vertices = 0;
  long long edges = 0;
  for (int y = 0; y <= h; ++y) {
    for (int x = 0; x <= w; ++x) {
      // Vertex (x, y) is the top-left corner of pixel (x, y).
      if (fg(x - 1, y - 1) || fg(x, y - 1) || fg(x - 1, y) || fg(x, y)) ++vertices;
      if (x < w) {
        const bool above = fg(x, y - 1);
        const bool below = fg(x, y);
        if (above || below) ++edges;
        if (above != below) ++t.perimeter;
      }
      if (y < h) {
        const bool left = fg(x - 1, y);
        const bool right = fg(x, y);
        if (left || right) ++edges;
        if (left != right) ++t.perimeter;
      }
      if (x < w && y < h && fg(x, y)) ++t.area;
    }
  }
  t.euler = vertices - edges + t.area;
  return t;
}

double pixel_change_fraction(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) {
    throw DataError("pixel_change_fraction: mask sizes differ (" + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()) + ")");
  }
  if (a.empty()) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] != 0) != (b[i] != 0);
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

std::array<GrayImage, 4> quadrant_rescale(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w == 0 || h == 0 || w % 2 != 0 || h % 2 != 0) {
    throw DataError("quadrant rescale needs even, non-zero dimensions, got " + std::to_string(w) + "x" +
                    std::to_string(h));
  }
  const int hw = w / 2;
  const int hh = h / 2;
  std::array<GrayImage, 4> out;
  const int origin[4][2] = {{0, 0}, {hw, 0}, {0, hh}, {hw, hh}};
  for (int q = 0; q < 4; ++q) {
    GrayImage r(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) r(x, y) = img(origin[q][0] + x / 2, origin[q][1] + y / 2);
    out[q] = std::move(r);
  }
  return out;
}

}  // namespace spmseg
