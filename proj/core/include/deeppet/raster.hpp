#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deeppet {

/// Thrown on contract violations: out-of-range indices, shape mismatches,
/// parameters outside their sanctioned ranges.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Row-major 2-D raster of doubles. The tag keeps image-space and
/// sinogram-space data from being mixed up at compile time.
template <class Tag>
class Raster {
 public:
  Raster() = default;
  Raster(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(checked_size(rows, cols), fill) {}
  Raster(int rows, int cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != checked_size(rows, cols)) {
      throw DomainError("raster value count does not match shape");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool same_shape(const Raster& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(int r, int c) { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> row(int r) { return {values_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const { return {values_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

  Raster& operator+=(const Raster& o) {
    require_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Raster& operator-=(const Raster& o) {
    require_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Raster& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

  friend Raster operator+(Raster a, const Raster& b) { return a += b; }
  friend Raster operator-(Raster a, const Raster& b) { return a -= b; }
  friend Raster operator*(Raster a, double s) { return a *= s; }
  friend Raster operator*(double s, Raster a) { return a *= s; }
  friend bool operator==(const Raster&, const Raster&) = default;

  void require_same(const Raster& o) const {
    if (!same_shape(o)) {
      throw DomainError("raster shape mismatch: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                        " vs " + std::to_string(o.rows_) + "x" + std::to_string(o.cols_));
    }
  }

 private:
  static std::size_t checked_size(int rows, int cols) {
    if (rows < 0 || cols < 0) throw DomainError("negative raster dimension");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

struct ImageTag {};
struct SinogramTag {};

/// Square activity or attenuation map, indexed (row, col) with row 0 at the top.
using Image = Raster<ImageTag>;
/// Angle-by-radial projection data, indexed (angle, radial).
using Sinogram = Raster<SinogramTag>;

template <class Tag>
double dot(const Raster<Tag>& a, const Raster<Tag>& b) {
  a.require_same(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace deeppet
