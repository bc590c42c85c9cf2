#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "spmseg/error.hpp"

namespace spmseg::nn {

struct Shape4 {
  int n = 0;  // batch
  int c = 0;  // channels
  int h = 0;
  int w = 0;

  std::size_t count() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
  std::string str() const;
};

// Cache-line aligned storage. Vectorized matrix kernels take different
// summation paths for differently aligned buffers, so a fixed alignment keeps
// results bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

// NCHW tensor of doubles, row-major within each plane.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(Shape4 shape, std::vector<double> data);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  double& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* plane(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  const double* plane(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }

  void fill(double v);

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape4 shape_;
  std::vector<double, AlignedAllocator<double>> data_;
};

// Throws ShapeError("<what>: expected <a>, got <b>") on mismatch.
void require_shape(const Tensor4& t, const Shape4& expected, const std::string& what);

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace spmseg::nn
