#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "spmseg/augment.hpp"
#include "spmseg/preprocess.hpp"
#include "spmseg/rng.hpp"

namespace spmseg {

namespace {

constexpr int kGate = 128;

constexpr std::array<std::pair<NoiseKind, std::string_view>, 9> kNames{{
    {NoiseKind::stripes, "stripes"},
    {NoiseKind::banding, "banding"},
    {NoiseKind::streak_mask, "streak_mask"},
    {NoiseKind::background_contrast, "background_contrast"},
    {NoiseKind::inversion, "inversion"},
    {NoiseKind::blur, "blur"},
    {NoiseKind::drift, "drift"},
    {NoiseKind::banding_plus_stripes, "banding_plus_stripes"},
    {NoiseKind::hf_horizontal_banding, "hf_horizontal_banding"},
}};

int band_period(const NoiseSpec& spec, const GrayImage& img) {
  if (spec.band_period != 0) return spec.band_period;
  if (spec.kind == NoiseKind::hf_horizontal_banding) return 4;
  return std::max(2, img.width() / 4);
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "unknown";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw ParameterError("unknown noise kind '" + std::string(name) + "'");
}

void NoiseSpec::validate() const {
  if (!(amplitude >= 0.0)) throw ParameterError("noise amplitude must be >= 0");
  if (stripe_count < 1) throw ParameterError("stripe_count must be >= 1");
  if (band_period != 0 && band_period < 2) throw ParameterError("band_period must be >= 2");
  if (kind == NoiseKind::hf_horizontal_banding && band_period > 8) {
    throw ParameterError("high-frequency banding needs band_period <= 8");
  }
  if (drift_row_begin < 0 || drift_row_end < drift_row_begin) {
    throw ParameterError("drift band must satisfy 0 <= begin <= end");
  }
  if (mask_transform.scale < 0.0) throw ParameterError("mask scale must be >= 0");
  if (kind == NoiseKind::blur) gaussian_kernel(blur_kernel, blur_sigma);
}

GrayImage add_stripes(const GrayImage& img, const NoiseSpec& spec) {
  spec.validate();
  GrayImage out = img;
  if (img.empty()) return out;
  Rng rng(spec.seed);
  std::vector<int> rows(img.height());
  std::iota(rows.begin(), rows.end(), 0);
  const int count = std::min(spec.stripe_count, img.height());
  // Partial Fisher-Yates: the first `count` entries are the stripe rows.
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.below(rows.size() - i));
    std::swap(rows[i], rows[j]);
  }
  for (int i = 0; i < count; ++i) {
    const double delta = rng.below(2) == 0 ? spec.amplitude : -spec.amplitude;
    for (auto& v : out.row(rows[i])) v = clamp_to_byte(v + delta);
  }
  return out;
}

GrayImage add_banding(const GrayImage& img, const NoiseSpec& spec) {
  spec.validate();
  if (spec.kind != NoiseKind::hf_horizontal_banding && spec.kind != NoiseKind::banding &&
      spec.kind != NoiseKind::banding_plus_stripes) {
    throw ParameterError("add_banding needs a banding noise kind");
  }
  const bool horizontal = spec.kind == NoiseKind::hf_horizontal_banding;
  const double period = band_period(spec, img);
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double t = horizontal ? y : x;
      const double delta = spec.amplitude * std::sin(2.0 * std::numbers::pi * t / period);
      out(x, y) = clamp_to_byte(img(x, y) + delta);
    }
  }
  return out;
}

GrayImage transform_mask(const GrayImage& mask, const NoiseSpec& spec, int width, int height) {
  const MaskTransform& t = spec.mask_transform;
  GrayImage m = mask;
  if (t.scale == 0.0) {
    if (m.width() != width || m.height() != height) m = resize_nearest(m, width, height);
  } else if (t.scale != 1.0) {
    const int w = static_cast<int>(std::lround(m.width() * t.scale));
    const int h = static_cast<int>(std::lround(m.height() * t.scale));
    m = resize_nearest(m, w, h);
  }
  if (m.width() != width || m.height() != height) {
    throw DataError("streak mask is " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                    " after transform but the image is " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  bool fh = t.flip_horizontal;
  bool fv = t.flip_vertical;
  if (t.random_flips) {
    Rng rng(derive_seed(spec.seed, {0x6d61736bULL}));
    fh = rng.below(2) == 1;
    fv = rng.below(2) == 1;
  }
  if (fh) m = flip_horizontal(m);
  if (fv) m = flip_vertical(m);
  return m;
}

GrayImage apply_streak_mask(const GrayImage& img, const GrayImage& mask, const NoiseSpec& spec) {
  spec.validate();
  const GrayImage m = transform_mask(mask, spec, img.width(), img.height());
  GrayImage out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < kGate) out[i] = std::max(out[i], m[i]);
  }
  return out;
}

GrayImage add_background_contrast(const GrayImage& img, const GrayImage* mask, const NoiseSpec& spec) {
  spec.validate();
  GrayImage out = img;
  if (mask != nullptr) {
    const GrayImage m = transform_mask(*mask, spec, img.width(), img.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] >= kGate) out[i] = std::min<std::uint8_t>(out[i], static_cast<std::uint8_t>(255 - m[i]));
    }
    return out;
  }
  const int w = img.width();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const double ramp = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
      out(x, y) = clamp_to_byte(img(x, y) - spec.amplitude * ramp);
    }
  }
  return out;
}

GrayImage invert(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<std::uint8_t>(255 - img[i]);
  return out;
}

GrayImage add_blur(const GrayImage& img, const NoiseSpec& spec) {
  spec.validate();
  return gaussian_filter(img, spec.blur_kernel, spec.blur_sigma);
}

GrayImage add_drift(const GrayImage& img, const NoiseSpec& spec) {
  spec.validate();
  if (img.empty()) return img;
  int begin = spec.drift_row_begin;
  int end = spec.drift_row_end;
  if (begin == end) {
    Rng rng(spec.seed);
    const int band = std::min(img.height(), std::max(3, img.height() / 8));
    begin = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height() - band + 1)));
    end = begin + band;
  }
  if (end > img.height()) throw ParameterError("drift band extends past the last row");

  GrayImage out = img;
  const int w = img.width();
  const double centre = (begin + end - 1) / 2.0;
  const double half = (end - begin - 1) / 2.0;
  for (int y = begin; y < end; ++y) {
    const double ramp = half > 0.0 ? 1.0 - std::abs(y - centre) / half : 1.0;
    const int shift = static_cast<int>(std::floor(spec.amplitude * ramp + 0.5));
    for (int x = 0; x < w; ++x) out(x, y) = img(std::clamp(x - shift, 0, w - 1), y);
  }
  return out;
}

GrayImage apply_noise(const GrayImage& img, const NoiseSpec& spec, const GrayImage* mask) {
  switch (spec.kind) {
    case NoiseKind::stripes:
      return add_stripes(img, spec);
    case NoiseKind::banding:
    case NoiseKind::hf_horizontal_banding:
      return add_banding(img, spec);
    case NoiseKind::streak_mask:
      if (mask == nullptr) throw ParameterError("streak_mask noise needs a streak mask image");
      return apply_streak_mask(img, *mask, spec);
    case NoiseKind::background_contrast:
      return add_background_contrast(img, mask, spec);
    case NoiseKind::inversion:
      return invert(img);
    case NoiseKind::blur:
      return add_blur(img, spec);
    case NoiseKind::drift:
      return add_drift(img, spec);
    case NoiseKind::banding_plus_stripes: {
      NoiseSpec stripes = spec;
      stripes.kind = NoiseKind::stripes;
      stripes.seed = derive_seed(spec.seed, {1});
      return add_stripes(add_banding(img, spec), stripes);
    }
  }
  throw ParameterError("unhandled noise kind");
}

GrayImage synth_streak_mask(int width, int height, std::uint64_t seed, int streak_count) {
  if (width <= 0 || height <= 0) throw ParameterError("streak mask size must be positive");
  GrayImage mask(width, height);
  Rng rng(seed);
  const int count = streak_count > 0 ? streak_count : std::max(4, height / 12);
  for (int s = 0; s < count; ++s) {
    const int y = static_cast<int>(rng.below(height));
    const int thickness = 1 + static_cast<int>(rng.below(2));
    const int length = std::max(2, width / 8 + static_cast<int>(rng.below(std::max(1, width / 2))));
    const int x0 = static_cast<int>(rng.below(width));
    const double peak = 80.0 + 40.0 * rng.uniform();
    // Bright head fading along the fast-scan direction.
    for (int i = 0; i < length && x0 + i < width; ++i) {
      const double v = peak * (1.0 - 0.5 * i / length);
      for (int t = 0; t < thickness && y + t < height; ++t) {
        auto& px = mask(x0 + i, y + t);
        px = std::max(px, clamp_to_byte(v));
      }
    }
  }
  return mask;
}

AugmentationProcess make_process(int id) {
  auto spec = [](NoiseKind k) {
    NoiseSpec s;
    s.kind = k;
    s.mask_transform.random_flips = true;
    return s;
  };
  AugmentationProcess p;
  p.id = id;
  switch (id) {
    case 1:
      p.variants = {spec(NoiseKind::stripes),   spec(NoiseKind::banding),
                    spec(NoiseKind::streak_mask), spec(NoiseKind::background_contrast),
                    spec(NoiseKind::inversion), spec(NoiseKind::blur),
                    spec(NoiseKind::drift)};
      break;
    case 2:
      p.variants = {spec(NoiseKind::stripes),   spec(NoiseKind::banding),
                    spec(NoiseKind::hf_horizontal_banding), spec(NoiseKind::background_contrast),
                    spec(NoiseKind::inversion), spec(NoiseKind::blur),
                    spec(NoiseKind::drift)};
      break;
    case 3:
      p.variants = {spec(NoiseKind::stripes), spec(NoiseKind::banding), spec(NoiseKind::streak_mask),
                    spec(NoiseKind::background_contrast), spec(NoiseKind::banding_plus_stripes)};
      break;
    default:
      throw ParameterError("augmentation process must be 1, 2 or 3; got " + std::to_string(id));
  }
  return p;
}

std::vector<AugmentedPair> run_process(const std::vector<LabeledImage>& inputs,
                                       const AugmentationProcess& process,
                                       const GrayImage* streak_mask, std::uint64_t seed) {
  std::vector<AugmentedPair> out;
  out.reserve(inputs.size() * process.variants.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& in = inputs[i];
    if (!in.image.same_shape(in.mask)) {
      throw DataError("input " + std::to_string(i) + ": image and mask sizes differ");
    }
    for (std::size_t v = 0; v < process.variants.size(); ++v) {
      NoiseSpec spec = process.variants[v];
      spec.seed = derive_seed(seed, {i, v});
      AugmentedPair pair{apply_noise(in.image, spec, streak_mask), in.mask, spec.kind, i,
                         spec.kind == NoiseKind::drift};
      out.push_back(std::move(pair));
    }
  }
  return out;
}

}  // namespace spmseg
