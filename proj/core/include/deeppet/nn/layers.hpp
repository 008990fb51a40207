#pragma once

#include <memory>
#include <string>
#include <vector>

#include "deeppet/nn/tensor.hpp"

namespace deeppet::nn {

/// Output extent of a 3x3 convolution with one pixel of zero padding.
constexpr int conv_out_size(int in, int stride) { return (in + stride - 1) / stride; }

/// Base class for the layers of a sequential network. forward() caches what
/// backward() needs; backward() accumulates parameter gradients and returns
/// the gradient with respect to the layer input.
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  /// (C, H, W) produced from an input of (C, H, W).
  virtual std::array<int, 3> output_shape(std::array<int, 3> in) const = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  /// Non-trainable state saved in checkpoints (running statistics).
  virtual std::vector<Tensor<T>*> buffers() { return {}; }
  /// Drops cached activations.
  virtual void clear_cache() {}
};

/// 3x3 convolution, stride 1 or 2, zero padding 1 (output = ceil(in / stride)).
/// Implemented as im2col followed by a GEMM.
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int stride, bool bias);

  std::string kind() const override { return "conv3x3"; }
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::array<int, 3> output_shape(std::array<int, 3> in) const override;
  std::vector<Parameter<T>*> parameters() override;
  void clear_cache() override { input_ = Tensor<T>(); }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int stride() const { return stride_; }
  bool has_bias() const { return has_bias_; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  int in_;
  int out_;
  int stride_;
  bool has_bias_;
  Parameter<T> weight_;  ///< [out, in, 3, 3]
  Parameter<T> bias_;    ///< [1, out, 1, 1]
  Tensor<T> input_;
};

/// Per-channel batch normalisation. Running statistics follow
/// running = (1 - momentum) * running + momentum * batch.
template <class T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.2, double eps = 1e-5);

  std::string kind() const override { return "batchnorm"; }
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::array<int, 3> output_shape(std::array<int, 3> in) const override { return in; }
  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> buffers() override { return {&running_mean_, &running_var_}; }
  void clear_cache() override { xhat_ = Tensor<T>(); }

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }
  double momentum() const { return momentum_; }
  void set_momentum(double m) { momentum_ = m; }

 private:
  int channels_;
  double momentum_;
  double eps_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool cached_train_ = false;
};

template <class T>
class ReLU final : public Layer<T> {
 public:
  std::string kind() const override { return "relu"; }
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::array<int, 3> output_shape(std::array<int, 3> in) const override { return in; }
  void clear_cache() override { output_ = Tensor<T>(); }

 private:
  Tensor<T> output_;
};

/// Bilinear resize to a fixed larger size, half-pixel (align_corners=false)
/// sampling: src = (dst + 0.5) * in / out - 0.5, clamped to the edges.
template <class T>
class UpsampleBilinear final : public Layer<T> {
 public:
  UpsampleBilinear(int out_h, int out_w);

  std::string kind() const override { return "upsample_bilinear"; }
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::array<int, 3> output_shape(std::array<int, 3> in) const override;

  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }

 private:
  int out_h_;
  int out_w_;
  typename Tensor<T>::Shape in_shape_{0, 0, 0, 0};
};

/// Interpolation taps for one output coordinate.
struct BilinearTap {
  int i0 = 0;
  int i1 = 0;
  double w1 = 0.0;  ///< weight of i1; i0 gets 1 - w1
};
std::vector<BilinearTap> bilinear_taps(int in, int out);

/// Mean squared error and its gradient 2 (x - y) / n (written to grad if non-null).
template <class T>
double mse_loss(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* grad);

}  // namespace deeppet::nn
