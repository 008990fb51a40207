#pragma once

#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deeppet::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Allocator with a fixed 64-byte alignment. Vectorised kernels split their
/// work according to the address of the data, so a fixed alignment is what
/// makes results bit-reproducible from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW tensor.
template <class T>
class Tensor {
 public:
  using Shape = std::array<int, 4>;
  using Storage = AlignedVector<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(count(shape), fill) {}
  Tensor(Shape shape, const std::vector<T>& data) : shape_(shape), data_(data.begin(), data.end()) {
    if (data_.size() != count(shape)) throw ShapeError("tensor data size does not match shape");
  }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(shape_[2]) * static_cast<std::size_t>(shape_[3]); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  Storage& values() { return data_; }
  const Storage& values() const { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  T at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  /// Pointer to sample n (all channels).
  T* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * per_sample(); }
  const T* sample(int n) const { return data_.data() + static_cast<std::size_t>(n) * per_sample(); }
  std::size_t per_sample() const { return static_cast<std::size_t>(shape_[1]) * plane(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  static std::size_t count(const Shape& s) {
    for (int d : s)
      if (d < 0) throw ShapeError("negative tensor dimension");
    return static_cast<std::size_t>(s[0]) * s[1] * s[2] * s[3];
  }

 private:
  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  Shape shape_{0, 0, 0, 0};
  Storage data_;
};

inline std::string shape_string(const std::array<int, 4>& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]) + "x" + std::to_string(s[3]);
}

/// A trainable tensor and its gradient accumulator.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, typename Tensor<T>::Shape shape) : name(std::move(n)), value(shape), grad(shape) {}
  void zero_grad() { grad.fill(T(0)); }
};

}  // namespace deeppet::nn
