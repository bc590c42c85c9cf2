#pragma once

#include "spmseg/image.hpp"

namespace spmseg {

struct LocalMeanConfig {
  int window = 15;   // odd, >= 3
  int offset_c = 0;  // added to the local mean before comparison

  void validate() const;
};

struct OtsuResult {
  BinaryMask mask;
  int threshold = 0;
};

// All binarisations use pixel >= threshold as foreground.
BinaryMask threshold_global_mean(const GrayImage& img);
BinaryMask threshold_local_mean(const GrayImage& img, const LocalMeanConfig& cfg = {});
// Maximizes the between-class variance over t in [0, 255] with exact integer
// arithmetic; the smallest maximizing t wins. A constant image gives t = 0.
OtsuResult threshold_otsu(const GrayImage& img);
BinaryMask threshold_fixed(const GrayImage& img, int t);

// 3x3 majority (boolean median) with mirrored borders.
BinaryMask despeckle(const BinaryMask& m);

}  // namespace spmseg
