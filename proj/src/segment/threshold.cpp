#include <array>
#include <cstdint>

#include "spmseg/segment.hpp"

namespace spmseg {

namespace {

using u128 = unsigned __int128;

// Between-class variance of the split {< t} / {>= t}, up to the common
// factor 1/N^2: (S0*N - S*n0)^2 / (n0*n1). Stored as quotient and remainder
// so two candidates compare exactly.
struct Score {
  u128 quotient = 0;
  std::uint64_t remainder = 0;
  std::uint64_t denom = 1;

  bool greater_than(const Score& o) const {
    if (quotient != o.quotient) return quotient > o.quotient;
    return static_cast<u128>(remainder) * o.denom > static_cast<u128>(o.remainder) * denom;
  }
};

}  // namespace

void LocalMeanConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw ParameterError("local-mean window must be odd and >= 3");
}

BinaryMask threshold_global_mean(const GrayImage& img) {
  std::uint64_t sum = 0;
  for (auto v : img.data()) sum += v;
  const std::uint64_t n = img.size();
  BinaryMask out(img.width(), img.height());
  // v >= sum / n  <=>  v * n >= sum
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] * n >= sum ? 1 : 0;
  return out;
}

BinaryMask threshold_local_mean(const GrayImage& img, const LocalMeanConfig& cfg) {
  cfg.validate();
  const int w = img.width();
  const int h = img.height();
  BinaryMask out(w, h);
  if (img.empty()) return out;
  const int r = cfg.window / 2;
  const int pw = w + 2 * r;
  const int ph = h + 2 * r;

  // Summed-area table over the mirror-padded image.
  std::vector<std::int64_t> sat(static_cast<std::size_t>(pw + 1) * (ph + 1), 0);
  auto at = [&](int x, int y) -> std::int64_t& { return sat[static_cast<std::size_t>(y) * (pw + 1) + x]; };
  for (int y = 0; y < ph; ++y) {
    const int sy = reflect_index(y - r, h);
    std::int64_t run = 0;
    for (int x = 0; x < pw; ++x) {
      run += img(reflect_index(x - r, w), sy);
      at(x + 1, y + 1) = at(x + 1, y) + run;
    }
  }
  const std::int64_t area = static_cast<std::int64_t>(cfg.window) * cfg.window;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Padded window spans [x, x + window) x [y, y + window).
      const std::int64_t s = at(x + cfg.window, y + cfg.window) - at(x, y + cfg.window) -
                             at(x + cfg.window, y) + at(x, y);
      // v >= s / area + c  <=>  v * area >= s + c * area
      out(x, y) = img(x, y) * area >= s + cfg.offset_c * area ? 1 : 0;
    }
  }
  return out;
}

OtsuResult threshold_otsu(const GrayImage& img) {
  std::array<std::uint64_t, 256> hist{};
  for (auto v : img.data()) ++hist[v];
  const std::uint64_t n = img.size();
  std::uint64_t total = 0;
  for (int v = 0; v < 256; ++v) total += hist[v] * static_cast<std::uint64_t>(v);

  int best_t = 0;
  Score best;
  std::uint64_t n0 = 0;  // pixels below t
  std::uint64_t s0 = 0;  // their intensity sum
  for (int t = 0; t < 256; ++t) {
    if (t > 0) {
      n0 += hist[t - 1];
      s0 += hist[t - 1] * static_cast<std::uint64_t>(t - 1);
    }
    const std::uint64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;  // score 0, never beats best
    // S0*N - S*n0 = n0*n1*(mu1 - mu0) < 0 unless equal; use magnitude.
    const u128 a = static_cast<u128>(total) * n0;
    const u128 b = static_cast<u128>(s0) * n;
    const u128 diff = a > b ? a - b : b - a;
    const u128 num = diff * diff;
    const u128 den = static_cast<u128>(n0) * n1;
    Score sc{num / den, static_cast<std::uint64_t>(num % den), static_cast<std::uint64_t>(den)};
    if (sc.greater_than(best)) {
      best = sc;
      best_t = t;
    }
  }
  return {threshold_fixed(img, best_t), best_t};
}

BinaryMask threshold_fixed(const GrayImage& img, int t) {
  if (t < 0 || t > 255) throw ParameterError("threshold must lie in [0, 255]");
  return gray_to_mask(img, t);
}

BinaryMask despeckle(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int votes = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) votes += m(reflect_index(x + dx, w), reflect_index(y + dy, h));
      out(x, y) = votes >= 5 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace spmseg
