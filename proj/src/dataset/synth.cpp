#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "spmseg/dataset.hpp"
#include "spmseg/preprocess.hpp"
#include "spmseg/rng.hpp"

namespace spmseg {

namespace {

Grid<double> white_noise(int w, int h, Rng& rng) {
  Grid<double> g(w, h);
  for (auto& v : g.data()) v = rng.normal();
  return g;
}

int kernel_for(double sigma) { return 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1; }

// Separable Gaussian with independent sigmas per axis.
Grid<double> smooth(const Grid<double>& f, double sx, double sy) {
  const int w = f.width();
  const int h = f.height();
  const auto kx = gaussian_kernel(kernel_for(sx), sx);
  const auto ky = gaussian_kernel(kernel_for(sy), sy);
  const int rx = static_cast<int>(kx.size()) / 2;
  const int ry = static_cast<int>(ky.size()) / 2;
  Grid<double> tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -rx; i <= rx; ++i) acc += kx[i + rx] * f(reflect_index(x + i, w), y);
      tmp(x, y) = acc;
    }
  Grid<double> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -ry; i <= ry; ++i) acc += ky[i + ry] * tmp(x, reflect_index(y + i, h));
      out(x, y) = acc;
    }
  return out;
}

void standardize(Grid<double>& g) {
  double mean = 0.0;
  for (double v : g.data()) mean += v;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double v : g.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(g.size()));
  for (auto& v : g.data()) v = sd > 0.0 ? (v - mean) / sd : 0.0;
}

// Marks exactly round(coverage * N) pixels with the highest scores; ties go
// to the lower index.
BinaryMask top_fraction(const Grid<double>& score, double coverage) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto count = static_cast<std::size_t>(std::llround(coverage * static_cast<double>(score.size())));
  auto before = [&](std::size_t a, std::size_t b) {
    return score[a] != score[b] ? score[a] > score[b] : a < b;
  };
  BinaryMask m(score.width(), score.height());
  if (count == 0) return m;
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count - 1), idx.end(), before);
  for (std::size_t k = 0; k < count; ++k) m[idx[k]] = 1;
  return m;
}

BinaryMask islands(const PatternSpec& s, Rng& rng) {
  const double area = s.coverage * s.width * s.height;
  const double r_mean = std::sqrt(area / (s.feature_count * std::numbers::pi));
  struct Disk {
    int x, y;
    double r;
  };
  std::vector<Disk> disks;
  for (int i = 0; i < s.feature_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 20000 && !placed; ++attempt) {
      const double r = r_mean * (0.8 + 0.4 * rng.uniform());
      const int margin = static_cast<int>(std::ceil(r));
      if (2 * margin >= s.width || 2 * margin >= s.height) break;
      const Disk d{rng.uniform_int(margin, s.width - 1 - margin), rng.uniform_int(margin, s.height - 1 - margin), r};
      // Centres at least r1 + r2 + 3 apart keep the digital disks two pixels clear.
      placed = std::all_of(disks.begin(), disks.end(), [&](const Disk& o) {
        return std::hypot(d.x - o.x, d.y - o.y) >= d.r + o.r + 3.0;
      });
      if (placed) disks.push_back(d);
    }
    if (!placed) {
      throw ParameterError("cannot place " + std::to_string(s.feature_count) + " disjoint islands at coverage " +
                           std::to_string(s.coverage) + "; lower coverage or feature_count");
    }
  }
  BinaryMask m(s.width, s.height);
  for (const auto& d : disks) {
    const int r = static_cast<int>(std::floor(d.r));
    for (int y = d.y - r; y <= d.y + r; ++y)
      for (int x = d.x - r; x <= d.x + r; ++x)
        if ((x - d.x) * (x - d.x) + (y - d.y) * (y - d.y) <= d.r * d.r) m(x, y) = 1;
  }
  return m;
}

BinaryMask cellular(const PatternSpec& s, Rng& rng) {
  std::vector<std::pair<double, double>> seeds(static_cast<std::size_t>(s.feature_count));
  for (auto& p : seeds) p = {rng.uniform() * s.width, rng.uniform() * s.height};
  Grid<double> score(s.width, s.height);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      double d1 = 1e300;
      double d2 = 1e300;
      for (const auto& [sx, sy] : seeds) {
        const double d = std::hypot(x + 0.5 - sx, y + 0.5 - sy);
        if (d < d1) {
          d2 = d1;
          d1 = d;
        } else if (d < d2) {
          d2 = d;
        }
      }
      score(x, y) = -(d2 - d1);  // cell walls lie where the two nearest seeds tie
    }
  return top_fraction(score, s.coverage);
}

BinaryMask field_pattern(const PatternSpec& s, Rng& rng) {
  const double l = s.correlation_length;
  const Grid<double> noise = white_noise(s.width, s.height, rng);
  Grid<double> f;
  switch (s.regime) {
    case Regime::worm_like:
      f = smooth(noise, l, l);
      break;
    case Regime::labyrinthine:
    case Regime::pores: {
      // Band-pass: a dominant feature spacing instead of a continuum of sizes.
      f = smooth(noise, l, l);
      const Grid<double> coarse = smooth(noise, 2.0 * l, 2.0 * l);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] -= coarse[i];
      break;
    }
    case Regime::fingering:
      f = smooth(noise, l, 3.0 * l);
      break;
    default:
      throw ParameterError("synth_pattern does not support regime '" + std::string(to_string(s.regime)) + "'");
  }
  return top_fraction(f, s.coverage);
}

}  // namespace

void PatternSpec::validate() const {
  if (!(coverage > 0.0 && coverage < 1.0)) throw ParameterError("pattern coverage must lie in (0, 1)");
  if (!(correlation_length > 0.0)) throw ParameterError("correlation_length must be positive");
  if (feature_count < 1) throw ParameterError("feature_count must be >= 1");
  if (width < 2 || height < 2) throw ParameterError("pattern size must be at least 2x2");
  if (!(edge_softness >= 0.0)) throw ParameterError("edge_softness must be >= 0");
  if (!(texture_amplitude >= 0.0)) throw ParameterError("texture_amplitude must be >= 0");
}

LabeledImage synth_pattern(const PatternSpec& spec) {
  spec.validate();
  Rng shape_rng(derive_seed(spec.seed, {1}));
  BinaryMask mask;
  switch (spec.regime) {
    case Regime::islands:
      mask = islands(spec, shape_rng);
      break;
    case Regime::cellular:
      mask = cellular(spec, shape_rng);
      break;
    default:
      mask = field_pattern(spec, shape_rng);
  }

  Grid<double> level(spec.width, spec.height);
  for (std::size_t i = 0; i < mask.size(); ++i) level[i] = mask[i] ? 180.0 : 60.0;
  if (spec.edge_softness > 0.0) level = smooth(level, spec.edge_softness, spec.edge_softness);
  if (spec.texture_amplitude > 0.0) {
    Rng tex_rng(derive_seed(spec.seed, {2}));
    Grid<double> tex = smooth(white_noise(spec.width, spec.height, tex_rng), 2.0, 2.0);
    standardize(tex);
    for (std::size_t i = 0; i < level.size(); ++i) level[i] += spec.texture_amplitude * tex[i];
  }
  GrayImage img(spec.width, spec.height);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = clamp_to_byte(level[i]);
  return {std::move(img), std::move(mask)};
}

}  // namespace spmseg
