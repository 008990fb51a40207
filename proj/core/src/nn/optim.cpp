#include "deeppet/nn/optim.hpp"

#include <cmath>

namespace deeppet::nn {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd" || s == "SGD") return OptimizerKind::SgdMomentum;
  if (s == "adam" || s == "Adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

template <class T>
void sgd_momentum_step(std::span<T> w, std::span<const T> grad, std::span<T> velocity, double lr, double momentum) {
  if (grad.size() != w.size() || velocity.size() != w.size()) throw ShapeError("sgd: buffer size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    velocity[i] = static_cast<T>(momentum * velocity[i] + grad[i]);
    w[i] = static_cast<T>(w[i] - lr * velocity[i]);
  }
}

template <class T>
void adam_step(std::span<T> w, std::span<const T> grad, std::span<T> m, std::span<T> u, double lr, int t,
               double beta1, double beta2, double eps) {
  if (grad.size() != w.size() || m.size() != w.size() || u.size() != w.size()) throw ShapeError("adam: buffer size mismatch");
  if (t < 1) throw std::invalid_argument("adam: step counter must start at 1");
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = grad[i];
    const double mi = beta1 * m[i] + (1.0 - beta1) * g;
    const double ui = beta2 * u[i] + (1.0 - beta2) * g * g;
    m[i] = static_cast<T>(mi);
    u[i] = static_cast<T>(ui);
    w[i] = static_cast<T>(w[i] - lr * (mi / c1) / (std::sqrt(ui / c2) + eps));
  }
}

template <class T>
Optimizer<T>::Optimizer(OptimizerKind kind, std::vector<Parameter<T>*> params, double momentum)
    : kind_(kind), params_(std::move(params)), momentum_(momentum) {
  for (auto* p : params_) {
    first_.emplace_back(p->value.size(), T(0));
    if (kind_ == OptimizerKind::Adam) second_.emplace_back(p->value.size(), T(0));
  }
}

template <class T>
void Optimizer<T>::step(double lr) {
  ++t_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    std::span<T> w(p.value.values());
    std::span<const T> g(p.grad.values());
    if (kind_ == OptimizerKind::Adam) {
      adam_step<T>(w, g, first_[k], second_[k], lr, t_);
    } else {
      sgd_momentum_step<T>(w, g, first_[k], lr, momentum_);
    }
  }
}

template <class T>
void Optimizer<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template void sgd_momentum_step<float>(std::span<float>, std::span<const float>, std::span<float>, double, double);
template void sgd_momentum_step<double>(std::span<double>, std::span<const double>, std::span<double>, double, double);
template void adam_step<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>, double, int,
                               double, double, double);
template void adam_step<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>, double,
                                int, double, double, double);
template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace deeppet::nn
