#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "deeppet/nn/tensor.hpp"

namespace deeppet::nn {

enum class OptimizerKind { SgdMomentum, Adam };
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view s);

/// v <- momentum * v + grad;  w <- w - lr * v.
template <class T>
void sgd_momentum_step(std::span<T> w, std::span<const T> grad, std::span<T> velocity, double lr, double momentum = 0.9);

/// Bias-corrected Adam update at step t (t >= 1).
template <class T>
void adam_step(std::span<T> w, std::span<const T> grad, std::span<T> m, std::span<T> u, double lr, int t,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Owns the per-parameter state of either optimiser.
template <class T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::vector<Parameter<T>*> params, double momentum = 0.9);

  void step(double lr);
  void zero_grad();
  OptimizerKind kind() const { return kind_; }
  int steps() const { return t_; }

 private:
  OptimizerKind kind_;
  std::vector<Parameter<T>*> params_;
  double momentum_;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
  int t_ = 0;
};

}  // namespace deeppet::nn
