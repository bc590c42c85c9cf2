#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <functional>

#include "spmseg/rng.hpp"
#include "spmseg/unet/model.hpp"
#include "support/test_util.hpp"

using namespace spmseg;
using namespace spmseg::nn;

namespace {

constexpr double kStep = 1e-3;
constexpr double kTol = 1e-5;

Tensor4 random_tensor(Shape4 s, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor4 t(s);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

double dot(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||) of
// the central-difference gradient of f with respect to x.
double gradient_error(Tensor4& x, const std::function<double()>& f, const Tensor4& analytic) {
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + kStep;
    const double up = f();
    x[i] = keep - kStep;
    const double down = f();
    x[i] = keep;
    const double numeric = (up - down) / (2.0 * kStep);
    diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
  }
  const double denom = std::max(std::sqrt(std::max(a2, n2)), 1e-300);
  return std::sqrt(diff2) / denom;
}

std::size_t closed_form_parameter_count(const UNetSpec& s) {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; };
  std::size_t total = 0;
  std::size_t in = 1;
  for (int l = 0; l < s.depth; ++l) {
    const std::size_t c = static_cast<std::size_t>(s.base_channels) << l;
    total += conv(in, c, 3) + conv(c, c, 3);
    in = c;
  }
  const std::size_t cb = static_cast<std::size_t>(s.base_channels) << s.depth;
  total += conv(in, cb, 3) + conv(cb, cb, 3);
  in = cb;
  for (int l = s.depth - 1; l >= 0; --l) {
    const std::size_t c = static_cast<std::size_t>(s.base_channels) << l;
    total += in * c * 4 + c;
    total += conv(2 * c, c, 3) + conv(c, c, 3);
    in = c;
  }
  return total + conv(in, 1, 1);
}

ModelWeights zero_model(const UNetSpec& spec) {
  ModelWeights m = build_unet(spec, 1);
  for (auto& p : m.params) p.value.fill(0.0);
  return m;
}

}  // namespace

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor4({1, 1, 2, 2}, std::vector<double>(3)), ShapeError);
  EXPECT_THROW(Tensor4({-1, 1, 2, 2}), ShapeError);
  EXPECT_THROW(require_shape(Tensor4({1, 1, 2, 2}), {1, 1, 2, 3}, "x"), ShapeError);
  EXPECT_EQ(Tensor4({2, 3, 4, 5}).size(), 120u);
}

TEST(Ops, IdentityConvAndConstantPool) {
  const Tensor4 x = random_tensor({2, 1, 6, 6}, 1);
  const Tensor4 y = conv2d_forward(x, Tensor4({1, 1, 1, 1}, 1.0), Tensor4({1, 1, 1, 1}));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
  const MaxPoolOutput p = maxpool2x2_forward(Tensor4({1, 2, 4, 6}, 3.5));
  EXPECT_EQ(p.y.shape(), (Shape4{1, 2, 2, 3}));
  for (double v : p.y.data()) EXPECT_EQ(v, 3.5);
  EXPECT_THROW(maxpool2x2_forward(Tensor4({1, 1, 3, 4})), ShapeError);
}

TEST(Ops, ConvMatchesDirectSum) {
  Tensor4 x = random_tensor({1, 2, 5, 4}, 2);
  Tensor4 w = random_tensor({3, 2, 3, 3}, 3);
  Tensor4 b = random_tensor({1, 3, 1, 1}, 4);
  const Tensor4 y = conv2d_forward(x, w, b);
  for (int o = 0; o < 3; ++o)
    for (int yy = 0; yy < 5; ++yy)
      for (int xx = 0; xx < 4; ++xx) {
        double s = b[o];
        for (int c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = yy + ky - 1, sx = xx + kx - 1;
              if (sy >= 0 && sy < 5 && sx >= 0 && sx < 4) s += w.at(o, c, ky, kx) * x.at(0, c, sy, sx);
            }
        EXPECT_NEAR(y.at(0, o, yy, xx), s, 1e-12);
      }
}

TEST(Gradients, Conv2d) {
  Tensor4 x = random_tensor({2, 2, 5, 6}, 10);
  Tensor4 w = random_tensor({3, 2, 3, 3}, 11);
  Tensor4 b = random_tensor({1, 3, 1, 1}, 12);
  const Tensor4 r = random_tensor({2, 3, 5, 6}, 13);
  auto f = [&] { return dot(conv2d_forward(x, w, b), r); };
  const Conv2dGrads g = conv2d_backward(x, w, r);
  EXPECT_LT(gradient_error(x, f, g.dx), kTol);
  EXPECT_LT(gradient_error(w, f, g.dweight), kTol);
  EXPECT_LT(gradient_error(b, f, g.dbias), kTol);
}

TEST(Gradients, MaxPool) {
  Tensor4 x = random_tensor({2, 2, 4, 6}, 20);
  const Tensor4 r = random_tensor({2, 2, 2, 3}, 21);
  auto f = [&] { return dot(maxpool2x2_forward(x).y, r); };
  const MaxPoolOutput p = maxpool2x2_forward(x);
  EXPECT_LT(gradient_error(x, f, maxpool2x2_backward(x.shape(), p.argmax, r)), kTol);
}

TEST(Gradients, UpConv) {
  Tensor4 x = random_tensor({2, 3, 3, 2}, 30);
  Tensor4 w = random_tensor({3, 2, 2, 2}, 31);
  Tensor4 b = random_tensor({1, 2, 1, 1}, 32);
  const Tensor4 r = random_tensor({2, 2, 6, 4}, 33);
  auto f = [&] { return dot(upconv2x2_forward(x, w, b), r); };
  const UpConvGrads g = upconv2x2_backward(x, w, r);
  EXPECT_LT(gradient_error(x, f, g.dx), kTol);
  EXPECT_LT(gradient_error(w, f, g.dweight), kTol);
  EXPECT_LT(gradient_error(b, f, g.dbias), kTol);
}

TEST(Gradients, ReluSigmoidConcat) {
  Tensor4 x = random_tensor({1, 2, 4, 4}, 40);
  const Tensor4 r = random_tensor({1, 2, 4, 4}, 41);
  EXPECT_LT(gradient_error(x, [&] { return dot(relu_forward(x), r); }, relu_backward(x, r)), kTol);
  EXPECT_LT(gradient_error(x, [&] { return dot(sigmoid_forward(x), r); },
                           sigmoid_backward(sigmoid_forward(x), r)),
            kTol);

  Tensor4 a = random_tensor({1, 2, 3, 3}, 42);
  Tensor4 b = random_tensor({1, 3, 3, 3}, 43);
  const Tensor4 rc = random_tensor({1, 5, 3, 3}, 44);
  auto f = [&] { return dot(concat_channels(a, b), rc); };
  const ConcatGrads g = concat_channels_backward(rc, 2);
  EXPECT_LT(gradient_error(a, f, g.da), kTol);
  EXPECT_LT(gradient_error(b, f, g.db), kTol);
  EXPECT_THROW(concat_channels(a, Tensor4({1, 1, 3, 4})), ShapeError);
}

TEST(Gradients, BinaryCrossEntropy) {
  Rng rng(50);
  Tensor4 p({1, 1, 4, 4});
  Tensor4 t({1, 1, 4, 4});
  for (std::size_t i = 0; i < p.size(); ++i) {
    // Kept away from 0 and 1 where -log(p) has large third derivatives.
    p[i] = 0.25 + 0.5 * rng.uniform();
    t[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  EXPECT_LT(gradient_error(p, [&] { return bce_loss(p, t); }, bce_loss_backward(p, t)), kTol);

  Tensor4 z = random_tensor({2, 1, 3, 3}, 51, 2.0);
  Tensor4 tz({2, 1, 3, 3});
  for (std::size_t i = 0; i < tz.size(); ++i) tz[i] = i % 3 == 0 ? 1.0 : 0.0;
  Tensor4 gz;
  const double loss = bce_with_logits(z, tz, &gz);
  EXPECT_NEAR(loss, bce_loss(sigmoid_forward(z), tz), 1e-12);
  EXPECT_LT(gradient_error(z, [&] { return bce_with_logits(z, tz, nullptr); }, gz), kTol);
}

TEST(Loss, UniformHalfIsLn2) {
  Tensor4 t({1, 1, 4, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = i % 2;
  EXPECT_DOUBLE_EQ(bce_loss(Tensor4({1, 1, 4, 4}, 0.5), t), std::log(2.0));
  EXPECT_DOUBLE_EQ(bce_with_logits(Tensor4({1, 1, 4, 4}, 0.0), t, nullptr), std::log(2.0));
}

TEST(Gradients, EndToEndTinyNetwork) {
  ModelWeights m = build_unet({1, 2, 8}, 60);
  // Non-zero biases and a full-scale head make every path contribute.
  Rng rng(61);
  for (auto& p : m.params) {
    if (p.name.ends_with(".bias") || p.name.starts_with("head"))
      for (auto& v : p.value.data()) v = 0.3 * rng.normal();
  }
  Tensor4 x = random_tensor({2, 1, 8, 8}, 62);
  Tensor4 t({2, 1, 8, 8});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;

  auto f = [&] { return bce_with_logits(unet_forward(m, x), t, nullptr); };
  ForwardTape tape;
  Tensor4 dlogits;
  bce_with_logits(unet_forward(m, x, &tape), t, &dlogits);
  m.zero_grad();
  const Tensor4 dx = unet_backward(m, tape, dlogits);
  EXPECT_LT(gradient_error(x, f, dx), kTol);
  for (auto& p : m.params) {
    const Tensor4 analytic = p.grad;
    EXPECT_LT(gradient_error(p.value, f, analytic), kTol) << p.name;
  }
}

TEST(UNet, ParameterCountClosedForm) {
  for (const UNetSpec s : {UNetSpec{1, 8, 64}, UNetSpec{3, 8, 128}, UNetSpec{2, 4, 32}}) {
    EXPECT_EQ(build_unet(s, 0).parameter_count(), closed_form_parameter_count(s));
  }
  EXPECT_EQ(build_unet({1, 8, 64}, 0).parameter_count(), 6425u);
}

TEST(UNet, SpecValidation) {
  EXPECT_THROW(build_unet({0, 8, 64}, 0), ParameterError);
  EXPECT_THROW(build_unet({3, 8, 100}, 0), ParameterError);
  EXPECT_THROW(build_unet({1, 0, 64}, 0), ParameterError);
}

TEST(UNet, ZeroWeightsGiveHalf) {
  const ModelWeights m = zero_model({2, 4, 16});
  const GrayImage img = test::random_gray(16, 16, 1);
  const Tensor4 p = predict_proba(m, img);
  for (double v : p.data()) EXPECT_EQ(v, 0.5);
  const BinaryMask mask = infer(m, img, 0.5);
  for (auto v : mask.data()) EXPECT_EQ(v, 1);
  EXPECT_THROW(infer(m, img, 1.01), ParameterError);
  EXPECT_THROW(infer(m, img, -0.1), ParameterError);
}

TEST(UNet, ShapeConservation) {
  const ModelWeights m = build_unet({2, 2, 16}, 3);
  for (int s : {4, 8, 12, 16, 20}) {
    EXPECT_EQ(unet_forward(m, Tensor4({1, 1, s, s})).shape(), (Shape4{1, 1, s, s}));
  }
  EXPECT_EQ(unet_forward(m, Tensor4({3, 1, 8, 8})).shape(), (Shape4{3, 1, 8, 8}));
  EXPECT_THROW(unet_forward(m, Tensor4({1, 1, 6, 8})), ShapeError);
  EXPECT_THROW(unet_forward(m, Tensor4({1, 2, 8, 8})), ShapeError);
}

TEST(UNet, InferResamplesToImageSize) {
  const ModelWeights m = build_unet({1, 2, 16}, 4);
  const BinaryMask mask = infer(m, test::random_gray(40, 24, 2));
  EXPECT_EQ(mask.width(), 40);
  EXPECT_EQ(mask.height(), 24);
}

TEST(WeightsIo, RoundTripBitIdentical) {
  test::TempDir dir;
  ModelWeights m = build_unet({2, 4, 16}, 7);
  m.metadata["note"] = "round trip";
  for (auto& p : m.params)
    for (auto& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
  save_weights(m, dir.path() / "a.weights");
  const ModelWeights back = load_weights(dir.path() / "a.weights");
  EXPECT_EQ(back.spec, m.spec);
  EXPECT_EQ(back.metadata.at("note"), "round trip");
  EXPECT_EQ(back.metadata.at("optimizer"), "none (untrained)");
  ASSERT_EQ(back.params.size(), m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    EXPECT_EQ(back.params[i].name, m.params[i].name);
    for (std::size_t j = 0; j < m.params[i].value.size(); ++j) {
      ASSERT_EQ(std::bit_cast<std::uint64_t>(back.params[i].value[j]),
                std::bit_cast<std::uint64_t>(m.params[i].value[j]));
    }
  }
  save_weights(back, dir.path() / "b.weights");
  std::ifstream a(dir.path() / "a.weights", std::ios::binary), b(dir.path() / "b.weights", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(WeightsIo, ReservedMetadataRejected) {
  test::TempDir dir;
  ModelWeights m = build_unet({1, 2, 8}, 7);
  m.metadata["depth"] = "9";
  EXPECT_THROW(save_weights(m, dir.path() / "x.weights"), ParameterError);
}

TEST(WeightsIo, TruncatedAndTrailingPayload) {
  test::TempDir dir;
  save_weights(build_unet({1, 2, 8}, 8), dir.path() / "w");
  std::ifstream in(dir.path() / "w", std::ios::binary);
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  {
    std::ofstream out(dir.path() / "short", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 5);
  }
  {
    std::ofstream out(dir.path() / "long", std::ios::binary);
    out << bytes << "xyz";
  }
  {
    std::ofstream out(dir.path() / "nomagic", std::ios::binary);
    out << "not a weight file\n";
  }
  EXPECT_THROW(load_weights(dir.path() / "short"), DataError);
  EXPECT_THROW(load_weights(dir.path() / "long"), DataError);
  EXPECT_THROW(load_weights(dir.path() / "nomagic"), DataError);
  EXPECT_THROW(load_weights(dir.path() / "missing"), DataError);
}

TEST(WeightsIo, DepthMismatchNamesFirstTensor) {
  test::TempDir dir;
  save_weights(build_unet({2, 8, 128}, 9), dir.path() / "d2");
  try {
    load_weights(dir.path() / "d2", UNetSpec{3, 8, 128});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("enc2.conv1.weight"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(load_weights(dir.path() / "d2", UNetSpec{2, 8, 128}));
  EXPECT_THROW(load_weights(dir.path() / "d2", UNetSpec{2, 8, 64}), DataError);
}

TEST(Train, InitialLossNearLn2AndDeterministic) {
  std::vector<LabeledImage> pairs;
  for (std::uint64_t i = 0; i < 3; ++i) pairs.push_back({test::random_gray(16, 16, i), test::random_mask(16, 16, i + 10)});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  const ModelWeights init = build_unet({1, 4, 16}, 11);
  const TrainResult a = train(init, pairs, cfg);
  const TrainResult b = train(init, pairs, cfg);
  EXPECT_NEAR(a.initial_loss, std::log(2.0), 0.1);
  ASSERT_EQ(a.epoch_loss.size(), 3u);
  EXPECT_NEAR(a.epoch_loss[0], std::log(2.0), 0.1);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  for (std::size_t p = 0; p < a.weights.params.size(); ++p) {
    const auto x = a.weights.params[p].value.data();
    const auto y = b.weights.params[p].value.data();
    ASSERT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
  EXPECT_EQ(a.weights.metadata.at("train_seed"), "5");
}

TEST(Train, Validation) {
  const ModelWeights m = build_unet({1, 2, 8}, 1);
  TrainConfig cfg;
  EXPECT_THROW(train(m, {}, cfg), ParameterError);
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train(m, {{GrayImage(8, 8), BinaryMask(8, 8)}}, cfg), ParameterError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(train(m, {{GrayImage(8, 8), BinaryMask(8, 8)}}, cfg), ParameterError);
  EXPECT_THROW(train(m, {{GrayImage(8, 8), BinaryMask(8, 9)}}, TrainConfig{}), DataError);
}

TEST(Train, OverfitsSinglePair) {
  GrayImage img(16, 16, 40);
  BinaryMask mask(16, 16, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if ((x - 8) * (x - 8) + (y - 7) * (y - 7) < 20 || (x < 4 && y > 10)) {
        img(x, y) = 200;
        mask(x, y) = 1;
      }
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-2;
  const TrainResult r = train(build_unet({2, 8, 16}, 2), {{img, mask}}, cfg);
  const BinaryMask pred = infer(r.weights, img);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) agree += pred[i] == mask[i];
  EXPECT_GE(static_cast<double>(agree) / pred.size(), 0.99);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}
