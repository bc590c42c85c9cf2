#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spmseg/augment.hpp"
#include "spmseg/image.hpp"
#include "spmseg/unet/ops.hpp"
#include "spmseg/unet/tensor.hpp"

namespace spmseg::nn {

// Contracting/expanding network with `depth` poolings. Level l carries
// base_channels * 2^l channels; the bottleneck sits at level `depth`.
struct UNetSpec {
  int depth = 3;
  int base_channels = 8;
  int input_size = 128;

  void validate() const;
  friend bool operator==(const UNetSpec&, const UNetSpec&) = default;
};

struct Parameter {
  std::string name;
  Tensor4 value;
  Tensor4 grad;
};

struct ModelWeights {
  UNetSpec spec;
  std::vector<Parameter> params;
  // Free-form provenance written to the weight-file header (optimizer, seed, ...).
  std::map<std::string, std::string> metadata;

  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();
};

// Parameter names and shapes in canonical (file) order.
std::vector<std::pair<std::string, Shape4>> unet_layout(const UNetSpec& spec);

// He-normal weights, zero biases; the 1x1 output head is scaled by 0.01 so an
// untrained network predicts ~0.5 everywhere.
ModelWeights build_unet(const UNetSpec& spec, std::uint64_t seed);

// Activations kept from the forward pass for backpropagation.
struct ForwardTape {
  struct ConvRecord {
    Tensor4 input;
    Tensor4 pre_activation;
  };
  std::vector<ConvRecord> convs;
  std::vector<MaxPoolOutput> pools;
  std::vector<Shape4> pool_inputs;
  std::vector<Tensor4> up_inputs;
  std::vector<int> skip_channels;
  Tensor4 head_input;
};

// Returns logits of shape (N, 1, H, W). H and W must be divisible by 2^depth.
Tensor4 unet_forward(const ModelWeights& model, const Tensor4& x, ForwardTape* tape = nullptr);
// Accumulates d(loss)/d(param) into every Parameter::grad; returns d(loss)/dx.
Tensor4 unet_backward(ModelWeights& model, const ForwardTape& tape, const Tensor4& dlogits);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 4;
  int epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  ModelWeights weights;
  double initial_loss = 0.0;        // mean BCE of the untrained model on the training set
  std::vector<double> epoch_loss;   // mean BCE over the batches of each epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Seeded-shuffle mini-batch Adam on mean per-pixel BCE. Images are resampled
// (nearest) to spec.input_size and scaled to [0, 1]; masks map to {0, 1}.
TrainResult train(ModelWeights model, const std::vector<LabeledImage>& pairs, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Per-pixel foreground probability at the model's input size.
Tensor4 predict_proba(const ModelWeights& model, const GrayImage& img);

// Probability >= prob_cut is foreground; prob_cut must lie in [0, 1]. The
// mask is resampled back to the image's own size.
BinaryMask infer(const ModelWeights& model, const GrayImage& img, double prob_cut = 0.5);

Tensor4 image_to_tensor(const GrayImage& img, int size);
Tensor4 mask_to_tensor(const BinaryMask& mask, int size);

// Text header (key: value lines, tensor manifest with byte offsets) followed
// by little-endian float32 payload in manifest order.
void save_weights(const ModelWeights& model, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);
// Additionally checks every tensor against the layout of `expected`.
ModelWeights load_weights(const std::filesystem::path& path, const UNetSpec& expected);

}  // namespace spmseg::nn
