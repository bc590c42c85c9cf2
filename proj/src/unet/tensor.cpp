#include "spmseg/unet/tensor.hpp"

#include <algorithm>

namespace spmseg::nn {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension in " + shape.str());
  }
  data_.assign(shape.count(), fill);
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(data.begin(), data.end()) {
  if (data_.size() != shape.count()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match " +
                     shape.str());
  }
}

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void require_shape(const Tensor4& t, const Shape4& expected, const std::string& what) {
  if (!(t.shape() == expected)) {
    throw ShapeError(what + ": expected " + expected.str() + ", got " + t.shape().str());
  }
}

}  // namespace spmseg::nn
