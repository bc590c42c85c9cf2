#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spmseg/image.hpp"

namespace spmseg {

enum class NoiseKind {
  stripes,
  banding,
  streak_mask,
  background_contrast,
  inversion,
  blur,
  drift,
  banding_plus_stripes,
  hf_horizontal_banding,
};

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

// Orientation/scale applied to a streak mask before use. A scale of 0 means
// "resample to the image size"; otherwise the mask is resampled by the factor
// and must then match the image exactly.
struct MaskTransform {
  bool flip_horizontal = false;
  bool flip_vertical = false;
  bool random_flips = false;  // draw both flips from the spec seed
  double scale = 0.0;
};

// One artificial noise application. Fields irrelevant to `kind` are ignored.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::stripes;
  double amplitude = 40.0;  // intensity levels (shift in pixels for drift)
  std::uint64_t seed = 0;
  int stripe_count = 3;
  int band_period = 0;  // pixels; 0 = width/4 (banding) or 4 (hf banding)
  int blur_kernel = 7;
  double blur_sigma = 1.5;
  int drift_row_begin = 0;  // [begin, end); begin == end picks a seeded band
  int drift_row_end = 0;
  std::string mask_ref;  // streak mask file, resolved by callers
  MaskTransform mask_transform;

  void validate() const;
};

GrayImage add_stripes(const GrayImage& img, const NoiseSpec& spec);
// Vertical banding for kind == banding, horizontal for hf_horizontal_banding.
GrayImage add_banding(const GrayImage& img, const NoiseSpec& spec);
// Brightens dark (< 128) pixels towards the transformed mask.
GrayImage apply_streak_mask(const GrayImage& img, const GrayImage& mask, const NoiseSpec& spec);
// With a mask, darkens bright (>= 128) pixels by the inverted transformed mask.
// Without one, subtracts a left-to-right ramp from 0 to `amplitude`.
GrayImage add_background_contrast(const GrayImage& img, const GrayImage* mask, const NoiseSpec& spec);
GrayImage invert(const GrayImage& img);
GrayImage add_blur(const GrayImage& img, const NoiseSpec& spec);
GrayImage add_drift(const GrayImage& img, const NoiseSpec& spec);

// Dispatches on spec.kind. `mask` is required for streak_mask and optional
// for background_contrast.
GrayImage apply_noise(const GrayImage& img, const NoiseSpec& spec, const GrayImage* mask = nullptr);

// Mask used by apply_streak_mask after flips and rescaling.
GrayImage transform_mask(const GrayImage& mask, const NoiseSpec& spec, int width, int height);

// Synthetic tip-contamination mask: horizontal bright streaks on black.
GrayImage synth_streak_mask(int width, int height, std::uint64_t seed, int streak_count = 0);

struct AugmentationProcess {
  int id = 3;
  std::vector<NoiseSpec> variants;
};

// Process 1: stripes, banding, streak mask, background contrast, inversion,
// blur, drift. Process 2 swaps the streak mask for high-frequency horizontal
// banding. Process 3: stripes, banding, streak mask, background contrast,
// banding plus stripes.
AugmentationProcess make_process(int id);

struct LabeledImage {
  GrayImage image;
  BinaryMask mask;
};

struct AugmentedPair {
  GrayImage image;
  BinaryMask mask;
  NoiseKind kind = NoiseKind::stripes;
  std::size_t source_index = 0;
  // Pixels moved relative to the label (drift); excluded from pixel-exact metrics.
  bool geometry_changed = false;
};

// One output per (input, variant); labels are copied unchanged. Variant
// seeds are derived from `seed`, the input index and the variant index.
std::vector<AugmentedPair> run_process(const std::vector<LabeledImage>& inputs,
                                       const AugmentationProcess& process,
                                       const GrayImage* streak_mask, std::uint64_t seed);

}  // namespace spmseg
