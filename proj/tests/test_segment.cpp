#include <gtest/gtest.h>

#include "spmseg/segment.hpp"
#include "support/test_util.hpp"

using namespace spmseg;

namespace {

// Direct window average on the mirror-padded image.
BinaryMask local_mean_oracle(const GrayImage& img, int window, int c) {
  const int r = window / 2;
  BinaryMask out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          s += img(reflect_index(x + dx, img.width()), reflect_index(y + dy, img.height()));
      out(x, y) = img(x, y) >= s / (window * window) + c ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

TEST(GlobalMean, ConstantAllTrue) {
  const BinaryMask m = threshold_global_mean(GrayImage(7, 5, 93));
  for (auto v : m.data()) EXPECT_EQ(v, 1);
}

TEST(GlobalMean, HalfAndHalf) {
  GrayImage img(10, 10, 0);
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 10; ++x) img(x, y) = 200;
  const BinaryMask m = threshold_global_mean(img);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_EQ(m(x, y), x >= 5 ? 1 : 0);
}

TEST(GlobalMean, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GrayImage img = test::random_gray(17 + static_cast<int>(seed % 7), 13, seed);
    long double sum = 0;
    for (auto v : img.data()) sum += v;
    const long double mean = sum / img.size();
    const BinaryMask m = threshold_global_mean(img);
    for (std::size_t i = 0; i < img.size(); ++i) ASSERT_EQ(m[i], img[i] >= mean ? 1 : 0);
  }
}

TEST(LocalMean, ConfigValidation) {
  EXPECT_THROW(threshold_local_mean(GrayImage(4, 4), {4, 0}), ParameterError);
  EXPECT_THROW(threshold_local_mean(GrayImage(4, 4), {1, 0}), ParameterError);
}

TEST(LocalMean, ConstantAllTrue) {
  const BinaryMask m = threshold_local_mean(GrayImage(20, 20, 77));
  for (auto v : m.data()) EXPECT_EQ(v, 1);
}

TEST(LocalMean, SingleBrightPixel) {
  GrayImage img(21, 21, 0);
  img(10, 10) = 255;
  const BinaryMask m = threshold_local_mean(img, {5, 1});
  for (int y = 0; y < 21; ++y)
    for (int x = 0; x < 21; ++x) EXPECT_EQ(m(x, y), x == 10 && y == 10 ? 1 : 0);
}

TEST(LocalMean, MatchesWindowOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const GrayImage img = test::random_gray(23, 19, seed);
    for (int window : {3, 7, 15}) {
      for (int c : {-5, 0, 4}) {
        ASSERT_EQ(threshold_local_mean(img, {window, c}), local_mean_oracle(img, window, c))
            << seed << " " << window << " " << c;
      }
    }
  }
}

TEST(LocalMean, HugeWindowTracksGlobalMean) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GrayImage img = test::random_gray(16, 16, seed);
    const BinaryMask local = threshold_local_mean(img, {33, 0});
    const BinaryMask global = threshold_global_mean(img);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < img.size(); ++i) agree += local[i] == global[i];
    EXPECT_GE(static_cast<double>(agree) / img.size(), 0.9) << seed;
  }
}

TEST(LocalMean, FlipEquivariant) {
  const GrayImage img = test::random_gray(31, 24, 5);
  EXPECT_EQ(threshold_local_mean(flip_horizontal(img)), flip_horizontal(threshold_local_mean(img)));
  EXPECT_EQ(threshold_local_mean(flip_vertical(img)), flip_vertical(threshold_local_mean(img)));
}

TEST(Otsu, BimodalSmallestT) {
  GrayImage img(10, 10, 0);
  for (std::size_t i = 50; i < 100; ++i) img[i] = 200;
  const OtsuResult r = threshold_otsu(img);
  EXPECT_EQ(r.threshold, 1);
  EXPECT_EQ(r.threshold, test::brute_force_otsu(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(r.mask[i], i >= 50 ? 1 : 0);
}

TEST(Otsu, ConstantImage) {
  const OtsuResult r = threshold_otsu(GrayImage(8, 8, 140));
  EXPECT_EQ(r.threshold, 0);
  for (auto v : r.mask.data()) EXPECT_EQ(v, 1);
}

TEST(Otsu, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    GrayImage img = test::random_gray(40, 30, seed);
    if (seed % 2 == 1) {
      // Narrow-range images produce many exact ties.
      for (auto& v : img.data()) v = static_cast<std::uint8_t>(100 + v % 4);
    }
    const OtsuResult r = threshold_otsu(img);
    ASSERT_EQ(r.threshold, test::brute_force_otsu(img)) << seed;
    ASSERT_EQ(r.mask, gray_to_mask(img, r.threshold));
  }
}

TEST(Fixed, RangeAndMonotone) {
  const GrayImage img = test::random_gray(30, 30, 9);
  EXPECT_THROW(threshold_fixed(img, -1), ParameterError);
  EXPECT_THROW(threshold_fixed(img, 256), ParameterError);
  BinaryMask prev = threshold_fixed(img, 0);
  for (auto v : prev.data()) EXPECT_EQ(v, 1);
  for (int t = 1; t <= 255; ++t) {
    const BinaryMask cur = threshold_fixed(img, t);
    for (std::size_t i = 0; i < cur.size(); ++i) ASSERT_LE(cur[i], prev[i]);
    prev = cur;
  }
  std::size_t last = img.size() + 1;
  for (int t : {105, 115, 125, 135}) {
    const BinaryMask m = threshold_fixed(img, t);
    const auto area = static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), 1));
    EXPECT_LE(area, last);
    last = area;
  }
}

TEST(Despeckle, IsolatedPixelRemoved) {
  BinaryMask m(9, 9, 0);
  m(4, 4) = 1;
  EXPECT_EQ(despeckle(m), BinaryMask(9, 9, 0));
  EXPECT_EQ(despeckle(BinaryMask(9, 9, 1)), BinaryMask(9, 9, 1));
}

TEST(Despeckle, StraightEdgesUnchanged) {
  for (int cut = 1; cut < 12; ++cut) {
    BinaryMask v(12, 10, 0);
    BinaryMask h(12, 10, 0);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 12; ++x) {
        v(x, y) = x >= cut ? 1 : 0;
        h(x, y) = y >= cut % 10 ? 1 : 0;
      }
    EXPECT_EQ(despeckle(v), v) << cut;
    EXPECT_EQ(despeckle(h), h) << cut;
  }
}

TEST(Despeckle, MajorityOracle) {
  const BinaryMask m = test::random_mask(20, 15, 3);
  const BinaryMask d = despeckle(m);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 20; ++x) {
      std::vector<int> vals;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) vals.push_back(m(reflect_index(x + dx, 20), reflect_index(y + dy, 15)));
      std::nth_element(vals.begin(), vals.begin() + 4, vals.end());
      ASSERT_EQ(d(x, y), vals[4]);
    }
}
