#include "spmseg/unet/model.hpp"

#include <cmath>

#include "spmseg/rng.hpp"

namespace spmseg::nn {

namespace {

std::string conv_name(const std::string& block, int i) { return block + ".conv" + std::to_string(i); }

int channels_at(const UNetSpec& spec, int level) { return spec.base_channels << level; }

Tensor4 conv_relu(const ModelWeights& m, const std::string& name, const Tensor4& x, ForwardTape* tape) {
  const Tensor4 pre = conv2d_forward(x, m.at(name + ".weight").value, m.at(name + ".bias").value);
  Tensor4 out = relu_forward(pre);
  if (tape != nullptr) tape->convs.push_back({x, pre});
  return out;
}

// Backpropagates relu + conv for one recorded convolution.
Tensor4 conv_relu_backward(ModelWeights& m, const std::string& name,
                           const ForwardTape::ConvRecord& rec, const Tensor4& dy) {
  const Tensor4 dpre = relu_backward(rec.pre_activation, dy);
  Parameter& w = m.at(name + ".weight");
  Parameter& b = m.at(name + ".bias");
  Conv2dGrads g = conv2d_backward(rec.input, w.value, dpre);
  for (std::size_t i = 0; i < w.grad.size(); ++i) w.grad[i] += g.dweight[i];
  for (std::size_t i = 0; i < b.grad.size(); ++i) b.grad[i] += g.dbias[i];
  return std::move(g.dx);
}

void add_into(Tensor4& acc, const Tensor4& x) {
  require_shape(x, acc.shape(), "gradient accumulation");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

}  // namespace

void UNetSpec::validate() const {
  if (depth < 1) throw ParameterError("U-Net depth must be >= 1");
  if (base_channels < 1) throw ParameterError("U-Net base_channels must be >= 1");
  if (input_size < 1 || input_size % (1 << depth) != 0) {
    throw ParameterError("U-Net input_size " + std::to_string(input_size) +
                         " must be a positive multiple of 2^depth = " + std::to_string(1 << depth));
  }
}

const Parameter& ModelWeights::at(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw DataError("model has no parameter named '" + name + "'");
}

Parameter& ModelWeights::at(const std::string& name) {
  return const_cast<Parameter&>(static_cast<const ModelWeights&>(*this).at(name));
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

void ModelWeights::zero_grad() {
  for (auto& p : params) p.grad.fill(0.0);
}

std::vector<std::pair<std::string, Shape4>> unet_layout(const UNetSpec& spec) {
  spec.validate();
  std::vector<std::pair<std::string, Shape4>> out;
  auto conv = [&](const std::string& name, int in, int outc, int k) {
    out.emplace_back(name + ".weight", Shape4{outc, in, k, k});
    out.emplace_back(name + ".bias", Shape4{1, outc, 1, 1});
  };
  int in = 1;
  for (int l = 0; l < spec.depth; ++l) {
    const int c = channels_at(spec, l);
    conv(conv_name("enc" + std::to_string(l), 1), in, c, 3);
    conv(conv_name("enc" + std::to_string(l), 2), c, c, 3);
    in = c;
  }
  const int cb = channels_at(spec, spec.depth);
  conv(conv_name("bottleneck", 1), in, cb, 3);
  conv(conv_name("bottleneck", 2), cb, cb, 3);
  in = cb;
  for (int l = spec.depth - 1; l >= 0; --l) {
    const int c = channels_at(spec, l);
    const std::string up = "up" + std::to_string(l);
    out.emplace_back(up + ".weight", Shape4{in, c, 2, 2});
    out.emplace_back(up + ".bias", Shape4{1, c, 1, 1});
    conv(conv_name("dec" + std::to_string(l), 1), 2 * c, c, 3);
    conv(conv_name("dec" + std::to_string(l), 2), c, c, 3);
    in = c;
  }
  conv("head", in, 1, 1);
  return out;
}

ModelWeights build_unet(const UNetSpec& spec, std::uint64_t seed) {
  ModelWeights m;
  m.spec = spec;
  Rng rng(seed);
  for (const auto& [name, shape] : unet_layout(spec)) {
    Parameter p{name, Tensor4(shape), Tensor4(shape)};
    const bool is_bias = name.ends_with(".bias");
    if (!is_bias) {
      const bool up = name.starts_with("up");
      // fan-in: conv = in * k * k; transposed 2x2/stride 2 = in (one tap per output)
      const double fan_in = up ? shape.n : static_cast<double>(shape.c) * shape.h * shape.w;
      double std = std::sqrt(2.0 / fan_in);
      if (name.starts_with("head")) std *= 0.01;
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = std * rng.normal();
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

Tensor4 unet_forward(const ModelWeights& model, const Tensor4& x, ForwardTape* tape) {
  const UNetSpec& spec = model.spec;
  const int div = 1 << spec.depth;
  const auto& s = x.shape();
  if (s.c != 1 || s.h % div != 0 || s.w % div != 0) {
    throw ShapeError("U-Net input must be (N, 1, H, W) with H, W divisible by " + std::to_string(div) +
                     ", got " + s.str());
  }
  if (tape != nullptr) *tape = ForwardTape{};

  std::vector<Tensor4> skips;
  Tensor4 h = x;
  for (int l = 0; l < spec.depth; ++l) {
    const std::string block = "enc" + std::to_string(l);
    h = conv_relu(model, conv_name(block, 1), h, tape);
    h = conv_relu(model, conv_name(block, 2), h, tape);
    skips.push_back(h);
    MaxPoolOutput pooled = maxpool2x2_forward(h);
    if (tape != nullptr) tape->pool_inputs.push_back(h.shape());
    h = pooled.y;
    if (tape != nullptr) tape->pools.push_back(std::move(pooled));
  }
  h = conv_relu(model, conv_name("bottleneck", 1), h, tape);
  h = conv_relu(model, conv_name("bottleneck", 2), h, tape);
  for (int l = spec.depth - 1; l >= 0; --l) {
    const std::string up = "up" + std::to_string(l);
    if (tape != nullptr) tape->up_inputs.push_back(h);
    const Tensor4 u = upconv2x2_forward(h, model.at(up + ".weight").value, model.at(up + ".bias").value);
    if (tape != nullptr) tape->skip_channels.push_back(skips[l].shape().c);
    h = concat_channels(skips[l], u);
    const std::string block = "dec" + std::to_string(l);
    h = conv_relu(model, conv_name(block, 1), h, tape);
    h = conv_relu(model, conv_name(block, 2), h, tape);
  }
  if (tape != nullptr) tape->head_input = h;
  return conv2d_forward(h, model.at("head.weight").value, model.at("head.bias").value);
}

Tensor4 unet_backward(ModelWeights& model, const ForwardTape& tape, const Tensor4& dlogits) {
  const UNetSpec& spec = model.spec;
  std::size_t conv_i = tape.convs.size();
  auto next_conv = [&]() -> const ForwardTape::ConvRecord& { return tape.convs.at(--conv_i); };

  Parameter& hw = model.at("head.weight");
  Parameter& hb = model.at("head.bias");
  Conv2dGrads hg = conv2d_backward(tape.head_input, hw.value, dlogits);
  add_into(hw.grad, hg.dweight);
  add_into(hb.grad, hg.dbias);
  Tensor4 g = std::move(hg.dx);

  std::vector<Tensor4> dskips(spec.depth);
  for (int l = 0; l < spec.depth; ++l) {
    const std::string block = "dec" + std::to_string(l);
    g = conv_relu_backward(model, conv_name(block, 2), next_conv(), g);
    g = conv_relu_backward(model, conv_name(block, 1), next_conv(), g);
    const std::size_t k = spec.depth - 1 - l;  // position in forward expanding order
    ConcatGrads cg = concat_channels_backward(g, tape.skip_channels.at(k));
    dskips[l] = std::move(cg.da);
    const std::string up = "up" + std::to_string(l);
    Parameter& uw = model.at(up + ".weight");
    Parameter& ub = model.at(up + ".bias");
    UpConvGrads ug = upconv2x2_backward(tape.up_inputs.at(k), uw.value, cg.db);
    add_into(uw.grad, ug.dweight);
    add_into(ub.grad, ug.dbias);
    g = std::move(ug.dx);
  }
  g = conv_relu_backward(model, conv_name("bottleneck", 2), next_conv(), g);
  g = conv_relu_backward(model, conv_name("bottleneck", 1), next_conv(), g);
  for (int l = spec.depth - 1; l >= 0; --l) {
    g = maxpool2x2_backward(tape.pool_inputs.at(l), tape.pools.at(l).argmax, g);
    add_into(g, dskips[l]);
    const std::string block = "enc" + std::to_string(l);
    g = conv_relu_backward(model, conv_name(block, 2), next_conv(), g);
    g = conv_relu_backward(model, conv_name(block, 1), next_conv(), g);
  }
  return g;
}

Tensor4 image_to_tensor(const GrayImage& img, int size) {
  const GrayImage r = (img.width() == size && img.height() == size) ? img : resize_nearest(img, size, size);
  Tensor4 t({1, 1, size, size});
  for (std::size_t i = 0; i < r.size(); ++i) t[i] = r[i] / 255.0;
  return t;
}

Tensor4 mask_to_tensor(const BinaryMask& mask, int size) {
  const BinaryMask r =
      (mask.width() == size && mask.height() == size) ? mask : resize_nearest(mask, size, size);
  Tensor4 t({1, 1, size, size});
  for (std::size_t i = 0; i < r.size(); ++i) t[i] = r[i] ? 1.0 : 0.0;
  return t;
}

Tensor4 predict_proba(const ModelWeights& model, const GrayImage& img) {
  return sigmoid_forward(unet_forward(model, image_to_tensor(img, model.spec.input_size)));
}

BinaryMask infer(const ModelWeights& model, const GrayImage& img, double prob_cut) {
  if (!(prob_cut >= 0.0 && prob_cut <= 1.0)) {
    throw ParameterError("prob_cut must lie in [0, 1]");
  }
  if (img.empty()) throw ParameterError("cannot segment an empty image");
  const Tensor4 p = predict_proba(model, img);
  const int size = model.spec.input_size;
  BinaryMask m(size, size);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = p[i] >= prob_cut ? 1 : 0;
  if (img.width() == size && img.height() == size) return m;
  return resize_nearest(m, img.width(), img.height());
}

}  // namespace spmseg::nn
