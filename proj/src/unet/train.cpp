#include <cmath>
#include <numeric>
#include <sstream>

#include "spmseg/rng.hpp"
#include "spmseg/unet/model.hpp"

namespace spmseg::nn {

namespace {

Tensor4 stack(const std::vector<Tensor4>& items, std::span<const std::size_t> idx) {
  const Shape4 one = items.at(idx[0]).shape();
  Tensor4 out({static_cast<int>(idx.size()), one.c, one.h, one.w});
  const std::size_t per = one.count();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto src = items[idx[b]].data();
    std::copy(src.begin(), src.end(), out.data().begin() + b * per);
  }
  return out;
}

std::string adam_description(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "adam beta1=" << cfg.beta1 << " beta2=" << cfg.beta2 << " eps=" << cfg.epsilon;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (epochs < 0) throw ParameterError("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ParameterError("Adam epsilon must be > 0");
}

TrainResult train(ModelWeights model, const std::vector<LabeledImage>& pairs, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  model.spec.validate();
  if (pairs.empty()) throw ParameterError("training needs at least one (image, mask) pair");
  const int size = model.spec.input_size;

  std::vector<Tensor4> inputs;
  std::vector<Tensor4> targets;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].image.same_shape(pairs[i].mask)) {
      throw DataError("training pair " + std::to_string(i) + ": image and mask sizes differ");
    }
    inputs.push_back(image_to_tensor(pairs[i].image, size));
    targets.push_back(mask_to_tensor(pairs[i].mask, size));
  }

  TrainResult result;
  {
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      total += bce_with_logits(unet_forward(model, inputs[i]), targets[i], nullptr);
    }
    result.initial_loss = total / static_cast<double>(inputs.size());
  }

  std::vector<std::vector<double>> m1(model.params.size());
  std::vector<std::vector<double>> m2(model.params.size());
  for (std::size_t p = 0; p < model.params.size(); ++p) {
    m1[p].assign(model.params[p].value.size(), 0.0);
    m2[p].assign(model.params[p].value.size(), 0.0);
  }

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  ForwardTape tape;
  Tensor4 dlogits;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch)})).shuffle(std::span<std::size_t>(order));
    double weighted = 0.0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Tensor4 x = stack(inputs, idx);
      const Tensor4 t = stack(targets, idx);

      model.zero_grad();
      const Tensor4 logits = unet_forward(model, x, &tape);
      const double loss = bce_with_logits(logits, t, &dlogits);
      if (!std::isfinite(loss)) {
        throw Error("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batch_no));
      }
      unet_backward(model, tape, dlogits);
      weighted += loss * static_cast<double>(count);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < model.params.size(); ++p) {
        Parameter& par = model.params[p];
        for (std::size_t i = 0; i < par.value.size(); ++i) {
          const double gi = par.grad[i];
          m1[p][i] = cfg.beta1 * m1[p][i] + (1.0 - cfg.beta1) * gi;
          m2[p][i] = cfg.beta2 * m2[p][i] + (1.0 - cfg.beta2) * gi * gi;
          const double mhat = m1[p][i] / c1;
          const double vhat = m2[p][i] / c2;
          par.value[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
      }
    }
    const double mean = weighted / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  model.zero_grad();

  model.metadata["optimizer"] = adam_description(cfg);
  model.metadata["learning_rate"] = std::to_string(cfg.learning_rate);
  model.metadata["batch_size"] = std::to_string(cfg.batch_size);
  model.metadata["epochs"] = std::to_string(cfg.epochs);
  model.metadata["train_seed"] = std::to_string(cfg.seed);
  model.metadata["loss"] = "mean per-pixel binary cross-entropy";
  result.weights = std::move(model);
  return result;
}

}  // namespace spmseg::nn
