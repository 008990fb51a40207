#include "deeppet/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace deeppet::nn {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// col is (in*9) x (oh*ow), row index (ci*3 + ky)*3 + kx.
template <class T>
void im2col(const T* x, int in, int h, int w, int stride, int oh, int ow, T* col) {
  const std::size_t p = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < in; ++ci) {
    const T* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * p;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - 1 + ky;
          T* drow = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(drow, drow + ow, T(0));
            continue;
          }
          const T* srow = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - 1 + kx;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, int in, int h, int w, int stride, int oh, int ow, T* x) {
  const std::size_t p = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < in; ++ci) {
    T* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * p;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - 1 + ky;
          if (iy < 0 || iy >= h) continue;
          T* drow = plane + static_cast<std::size_t>(iy) * w;
          const T* srow = src + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - 1 + kx;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int stride, bool bias)
    : in_(in_channels),
      out_(out_channels),
      stride_(stride),
      has_bias_(bias),
      weight_("weight", {out_channels, in_channels, 3, 3}),
      bias_("bias", {1, bias ? out_channels : 0, 1, 1}) {
  if (in_channels < 1 || out_channels < 1) throw ShapeError("conv channels must be positive");
  if (stride != 1 && stride != 2) throw ShapeError("conv stride must be 1 or 2");
}

template <class T>
std::array<int, 3> Conv2d<T>::output_shape(std::array<int, 3> in) const {
  if (in[0] != in_) throw ShapeError("conv input channels " + std::to_string(in[0]) + " != " + std::to_string(in_));
  if (in[1] < 1 || in[2] < 1) throw ShapeError("conv input spatial size must be >= 1");
  return {out_, conv_out_size(in[1], stride_), conv_out_size(in[2], stride_)};
}

template <class T>
std::vector<Parameter<T>*> Conv2d<T>::parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

template <class T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, bool train) {
  const auto os = output_shape({x.c(), x.h(), x.w()});
  const int oh = os[1], ow = os[2];
  const int k = in_ * 9;
  const int p = oh * ow;
  Tensor<T> y({x.n(), out_, oh, ow});
  AlignedVector<T> col(static_cast<std::size_t>(k) * p);
  ConstMapMat<T> wmat(weight_.value.data(), out_, k);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.sample(n), in_, x.h(), x.w(), stride_, oh, ow, col.data());
    MapMat<T> ymat(y.sample(n), out_, p);
    ymat.noalias() = wmat * ConstMapMat<T>(col.data(), k, p);
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) ymat.row(o).array() += bias_.value[static_cast<std::size_t>(o)];
    }
  }
  if (train) input_ = x;
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  if (input_.size() == 0) throw ShapeError("conv backward without a cached training forward");
  const Tensor<T>& x = input_;
  const int oh = grad_out.h(), ow = grad_out.w();
  if (grad_out.n() != x.n() || grad_out.c() != out_ || oh != conv_out_size(x.h(), stride_) ||
      ow != conv_out_size(x.w(), stride_)) {
    throw ShapeError("conv backward: gradient shape " + shape_string(grad_out.shape()) + " does not match");
  }
  const int k = in_ * 9;
  const int p = oh * ow;
  Tensor<T> dx(x.shape());
  AlignedVector<T> col(static_cast<std::size_t>(k) * p);
  AlignedVector<T> dcol(static_cast<std::size_t>(k) * p);
  ConstMapMat<T> wmat(weight_.value.data(), out_, k);
  MapMat<T> dw(weight_.grad.data(), out_, k);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.sample(n), in_, x.h(), x.w(), stride_, oh, ow, col.data());
    ConstMapMat<T> dy(grad_out.sample(n), out_, p);
    dw.noalias() += dy * ConstMapMat<T>(col.data(), k, p).transpose();
    MapMat<T>(dcol.data(), k, p).noalias() = wmat.transpose() * dy;
    col2im(dcol.data(), in_, x.h(), x.w(), stride_, oh, ow, dx.sample(n));
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += dy.row(o).sum();
    }
  }
  return dx;
}

template <class T>
BatchNorm2d<T>::BatchNorm2d(int channels, double momentum, double eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_("gamma", {1, channels, 1, 1}),
      beta_("beta", {1, channels, 1, 1}),
      running_mean_({1, channels, 1, 1}, T(0)),
      running_var_({1, channels, 1, 1}, T(1)) {
  if (channels < 1) throw ShapeError("batchnorm channels must be positive");
  gamma_.value.fill(T(1));
}

template <class T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, bool train) {
  if (x.c() != channels_) throw ShapeError("batchnorm channel mismatch");
  const int batch = x.n();
  const std::size_t plane = x.plane();
  Tensor<T> y(x.shape());
  if (train && batch < 2) throw ShapeError("batchnorm needs a batch of at least 2 in training mode");
  if (train) {
    xhat_ = Tensor<T>(x.shape());
    inv_std_.assign(static_cast<std::size_t>(channels_), T(0));
  }
  const double m = static_cast<double>(batch) * static_cast<double>(plane);
  for (int c = 0; c < channels_; ++c) {
    double mean, inv_std;
    if (train) {
      // Shifted sums: a constant channel gives an exactly zero deviation.
      const double shift = x.sample(0)[static_cast<std::size_t>(c) * plane];
      double s = 0.0;
      for (int n = 0; n < batch; ++n) {
        const T* px = x.sample(n) + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += static_cast<double>(px[i]) - shift;
      }
      mean = shift + s / m;
      double ss = 0.0;
      for (int n = 0; n < batch; ++n) {
        const T* px = x.sample(n) + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = static_cast<double>(px[i]) - mean;
          ss += d * d;
        }
      }
      const double var = ss / m;
      inv_std = 1.0 / std::sqrt(var + eps_);
      inv_std_[static_cast<std::size_t>(c)] = static_cast<T>(inv_std);
      const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
      running_mean_[static_cast<std::size_t>(c)] =
          static_cast<T>((1.0 - momentum_) * running_mean_[static_cast<std::size_t>(c)] + momentum_ * mean);
      running_var_[static_cast<std::size_t>(c)] =
          static_cast<T>((1.0 - momentum_) * running_var_[static_cast<std::size_t>(c)] + momentum_ * unbiased);
    } else {
      mean = running_mean_[static_cast<std::size_t>(c)];
      inv_std = 1.0 / std::sqrt(static_cast<double>(running_var_[static_cast<std::size_t>(c)]) + eps_);
    }
    const double g = gamma_.value[static_cast<std::size_t>(c)];
    const double b = beta_.value[static_cast<std::size_t>(c)];
    for (int n = 0; n < batch; ++n) {
      const std::size_t off = static_cast<std::size_t>(c) * plane;
      const T* px = x.sample(n) + off;
      T* py = y.sample(n) + off;
      T* ph = train ? xhat_.sample(n) + off : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        const double h = (static_cast<double>(px[i]) - mean) * inv_std;
        if (ph) ph[i] = static_cast<T>(h);
        py[i] = static_cast<T>(g * h + b);
      }
    }
  }
  if (train) cached_train_ = true;
  return y;
}

template <class T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
  if (!cached_train_ || xhat_.shape() != grad_out.shape()) {
    throw ShapeError("batchnorm backward without a matching training forward");
  }
  const int batch = grad_out.n();
  const std::size_t plane = grad_out.plane();
  const double m = static_cast<double>(batch) * static_cast<double>(plane);
  Tensor<T> dx(grad_out.shape());
  for (int c = 0; c < channels_; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * plane;
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < batch; ++n) {
      const T* dy = grad_out.sample(n) + off;
      const T* h = xhat_.sample(n) + off;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * h[i];
      }
    }
    gamma_.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy_xhat);
    beta_.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy);
    const double g = gamma_.value[static_cast<std::size_t>(c)];
    const double k = g * static_cast<double>(inv_std_[static_cast<std::size_t>(c)]) / m;
    for (int n = 0; n < batch; ++n) {
      const T* dy = grad_out.sample(n) + off;
      const T* h = xhat_.sample(n) + off;
      T* d = dx.sample(n) + off;
      for (std::size_t i = 0; i < plane; ++i) {
        d[i] = static_cast<T>(k * (m * dy[i] - sum_dy - h[i] * sum_dy_xhat));
      }
    }
  }
  return dx;
}

template <class T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, bool train) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  if (train) output_ = y;
  return y;
}

template <class T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
  if (output_.shape() != grad_out.shape()) throw ShapeError("relu backward without a matching training forward");
  Tensor<T> dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = output_[i] > T(0) ? grad_out[i] : T(0);
  return dx;
}

std::vector<BilinearTap> bilinear_taps(int in, int out) {
  if (in < 1 || out < in) throw ShapeError("bilinear upsampling needs out >= in >= 1");
  std::vector<BilinearTap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    BilinearTap t;
    t.i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    t.i1 = std::min(t.i0 + 1, in - 1);
    t.w1 = t.i1 == t.i0 ? 0.0 : src - t.i0;
    taps[static_cast<std::size_t>(d)] = t;
  }
  return taps;
}

template <class T>
UpsampleBilinear<T>::UpsampleBilinear(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("upsample target must be positive");
}

template <class T>
std::array<int, 3> UpsampleBilinear<T>::output_shape(std::array<int, 3> in) const {
  if (in[1] > out_h_ || in[2] > out_w_) throw ShapeError("bilinear upsampling cannot shrink the input");
  return {in[0], out_h_, out_w_};
}

template <class T>
Tensor<T> UpsampleBilinear<T>::forward(const Tensor<T>& x, bool train) {
  output_shape({x.c(), x.h(), x.w()});
  const auto ty = bilinear_taps(x.h(), out_h_);
  const auto tx = bilinear_taps(x.w(), out_w_);
  Tensor<T> y({x.n(), x.c(), out_h_, out_w_});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.sample(n) + static_cast<std::size_t>(c) * x.plane();
      T* dst = y.sample(n) + static_cast<std::size_t>(c) * y.plane();
      for (int oy = 0; oy < out_h_; ++oy) {
        const auto& a = ty[static_cast<std::size_t>(oy)];
        const T* r0 = src + static_cast<std::size_t>(a.i0) * x.w();
        const T* r1 = src + static_cast<std::size_t>(a.i1) * x.w();
        const T wy1 = static_cast<T>(a.w1), wy0 = static_cast<T>(1.0 - a.w1);
        for (int ox = 0; ox < out_w_; ++ox) {
          const auto& b = tx[static_cast<std::size_t>(ox)];
          const T wx1 = static_cast<T>(b.w1), wx0 = static_cast<T>(1.0 - b.w1);
          dst[static_cast<std::size_t>(oy) * out_w_ + ox] =
              wy0 * (wx0 * r0[b.i0] + wx1 * r0[b.i1]) + wy1 * (wx0 * r1[b.i0] + wx1 * r1[b.i1]);
        }
      }
    }
  }
  if (train) in_shape_ = x.shape();
  return y;
}

template <class T>
Tensor<T> UpsampleBilinear<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.h() != out_h_ || grad_out.w() != out_w_ || grad_out.n() != in_shape_[0] || grad_out.c() != in_shape_[1]) {
    throw ShapeError("upsample backward: gradient shape does not match");
  }
  const int ih = in_shape_[2], iw = in_shape_[3];
  const auto ty = bilinear_taps(ih, out_h_);
  const auto tx = bilinear_taps(iw, out_w_);
  Tensor<T> dx(in_shape_);
  for (int n = 0; n < grad_out.n(); ++n) {
    for (int c = 0; c < grad_out.c(); ++c) {
      const T* src = grad_out.sample(n) + static_cast<std::size_t>(c) * grad_out.plane();
      T* dst = dx.sample(n) + static_cast<std::size_t>(c) * dx.plane();
      for (int oy = 0; oy < out_h_; ++oy) {
        const auto& a = ty[static_cast<std::size_t>(oy)];
        T* r0 = dst + static_cast<std::size_t>(a.i0) * iw;
        T* r1 = dst + static_cast<std::size_t>(a.i1) * iw;
        const T wy1 = static_cast<T>(a.w1), wy0 = static_cast<T>(1.0 - a.w1);
        for (int ox = 0; ox < out_w_; ++ox) {
          const auto& b = tx[static_cast<std::size_t>(ox)];
          const T wx1 = static_cast<T>(b.w1), wx0 = static_cast<T>(1.0 - b.w1);
          const T g = src[static_cast<std::size_t>(oy) * out_w_ + ox];
          r0[b.i0] += wy0 * wx0 * g;
          r0[b.i1] += wy0 * wx1 * g;
          r1[b.i0] += wy1 * wx0 * g;
          r1[b.i1] += wy1 * wx1 * g;
        }
      }
    }
  }
  return dx;
}

template <class T>
double mse_loss(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* grad) {
  if (x.shape() != y.shape()) throw ShapeError("mse_loss: shape mismatch");
  if (x.size() == 0) throw ShapeError("mse_loss: empty tensors");
  const double inv_n = 1.0 / static_cast<double>(x.size());
  double acc = 0.0;
  if (grad) *grad = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
    if (grad) (*grad)[i] = static_cast<T>(2.0 * d * inv_n);
  }
  return acc * inv_n;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class UpsampleBilinear<float>;
template class UpsampleBilinear<double>;
template double mse_loss<float>(const Tensor<float>&, const Tensor<float>&, Tensor<float>*);
template double mse_loss<double>(const Tensor<double>&, const Tensor<double>&, Tensor<double>*);

}  // namespace deeppet::nn
