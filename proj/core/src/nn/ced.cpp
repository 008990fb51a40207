#include "deeppet/nn/ced.hpp"

#include <cmath>

#include "deeppet/random.hpp"

namespace deeppet::nn {

std::vector<std::pair<int, int>> CedSpec::encoder_sizes() const {
  std::vector<std::pair<int, int>> out;
  int h = input_h, w = input_w;
  for (int b = 0; b < downsample_blocks; ++b) {
    h = conv_out_size(h, 2);
    w = conv_out_size(w, 2);
    out.emplace_back(h, w);
  }
  return out;
}

std::vector<std::pair<int, int>> CedSpec::decoder_sizes() const {
  const auto enc = encoder_sizes();
  const double bh = enc.empty() ? input_h : enc.back().first;
  const double bw = enc.empty() ? input_w : enc.back().second;
  std::vector<std::pair<int, int>> out;
  for (int k = 1; k <= decoder_steps; ++k) {
    const double f = static_cast<double>(k) / decoder_steps;
    int h = static_cast<int>(std::lround(bh * std::pow(output_h / bh, f)));
    int w = static_cast<int>(std::lround(bw * std::pow(output_w / bw, f)));
    if (k == decoder_steps) {
      h = output_h;
      w = output_w;
    }
    out.emplace_back(h, w);
  }
  return out;
}

void CedSpec::validate() const {
  if (input_h < 1 || input_w < 1 || output_h < 1 || output_w < 1) throw ShapeError(name + ": sizes must be positive");
  if (stem_convs < 1 || base_features < 1 || downsample_blocks < 1 || convs_per_encoder_block < 1 ||
      decoder_steps < 1 || convs_per_decoder_block < 1) {
    throw ShapeError(name + ": layer counts must be positive");
  }
  if (downsample_blocks > 16 || decoder_steps > 16) throw ShapeError(name + ": too many blocks");
  if (decoder_output_features() < 1 || (decoder_output_features() << decoder_steps) != bottleneck_features()) {
    throw ShapeError(name + ": decoder halving does not divide the bottleneck width");
  }
  const auto enc = encoder_sizes().back();
  if (output_h < enc.first || output_w < enc.second) throw ShapeError(name + ": output smaller than the bottleneck");
  int ph = enc.first, pw = enc.second;
  for (auto [h, w] : decoder_sizes()) {
    if (h < ph || w < pw) throw ShapeError(name + ": decoder schedule shrinks");
    ph = h;
    pw = w;
  }
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ShapeError(name + ": BN momentum must be in (0, 1]");
}

namespace {

CedSpec paper_io(CedSpec s) {
  s.input_h = 288;
  s.input_w = 269;
  s.output_h = 128;
  s.output_w = 128;
  s.downsample_blocks = 4;
  s.decoder_steps = 4;
  return s;
}

}  // namespace

CedSpec ced_preset(std::string_view name) {
  CedSpec s;
  s.name = std::string(name);
  if (name == "deeppet" || name == "m3" || name == "m4" || name == "m5") {
    // 2 stem + 4 x 3 encoder + 4 x 4 decoder + 1 output = 31 convs.
    s = paper_io(s);
    s.stem_convs = 2;
    s.convs_per_encoder_block = 3;
    s.convs_per_decoder_block = 4;
    s.base_features = (name == "m3" || name == "m4") ? 32 : 64;
    s.optimizer = (name == "m4" || name == "m5") ? OptimizerKind::Adam : OptimizerKind::SgdMomentum;
  } else if (name == "m1") {
    s = paper_io(s);  // 1 + 4 x 2 + 4 x 4 + 1 = 26
    s.stem_convs = 1;
    s.convs_per_encoder_block = 2;
    s.convs_per_decoder_block = 4;
    s.base_features = 16;
  } else if (name == "m2") {
    s = paper_io(s);  // 4 + 4 x 3 + 4 x 3 + 1 = 29
    s.stem_convs = 4;
    s.convs_per_encoder_block = 3;
    s.convs_per_decoder_block = 3;
    s.base_features = 16;
  } else if (name == "m6" || name == "m7") {
    s = paper_io(s);  // 3 + 4 x 4 + 4 x 4 + 1 = 36
    s.stem_convs = 3;
    s.convs_per_encoder_block = 4;
    s.convs_per_decoder_block = 4;
    s.base_features = name == "m6" ? 32 : 128;
  } else if (name == "toy") {
    s.input_h = 96;
    s.input_w = 95;
    s.output_h = 64;
    s.output_w = 64;
    s.stem_convs = 1;
    s.base_features = 16;
    s.downsample_blocks = 3;
    s.convs_per_encoder_block = 2;
    s.decoder_steps = 3;
    s.convs_per_decoder_block = 2;
  } else {
    throw ShapeError("unknown CED preset '" + std::string(name) + "'");
  }
  s.validate();
  return s;
}

std::vector<std::string> ced_preset_names() { return {"m1", "m2", "m3", "m4", "deeppet", "m5", "m6", "m7", "toy"}; }

CedSpec with_io(CedSpec spec, int input_h, int input_w, int output_h, int output_w) {
  spec.input_h = input_h;
  spec.input_w = input_w;
  spec.output_h = output_h;
  spec.output_w = output_w;
  spec.validate();
  return spec;
}

template <class T>
CedModel<T>::CedModel(const CedSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(derive_seed(seed, 0x63656421ULL));
  auto conv = [&](int in, int out, int stride, bool bias) {
    auto c = std::make_unique<Conv2d<T>>(in, out, stride, bias);
    // He-uniform on fan-in.
    const double bound = std::sqrt(6.0 / (in * 9.0));
    for (auto& w : c->weight().value.values()) w = static_cast<T>(rng.uniform(-bound, bound));
    return c;
  };
  auto conv_bn_relu = [&](int in, int out, int stride) {
    add(conv(in, out, stride, false));
    add(std::make_unique<BatchNorm2d<T>>(out, spec_.bn_momentum));
    add(std::make_unique<ReLU<T>>());
  };

  int width = spec_.base_features;
  conv_bn_relu(1, width, 1);
  for (int i = 1; i < spec_.stem_convs; ++i) conv_bn_relu(width, width, 1);
  for (int b = 0; b < spec_.downsample_blocks; ++b) {
    conv_bn_relu(width, 2 * width, 2);
    width *= 2;
    for (int i = 1; i < spec_.convs_per_encoder_block; ++i) conv_bn_relu(width, width, 1);
  }
  encoder_end_ = layers_.size();
  for (auto [h, w] : spec_.decoder_sizes()) {
    add(std::make_unique<UpsampleBilinear<T>>(h, w));
    conv_bn_relu(width, width / 2, 1);
    width /= 2;
    for (int i = 1; i < spec_.convs_per_decoder_block; ++i) conv_bn_relu(width, width, 1);
  }
  add(conv(width, 1, 1, true));
  add(std::make_unique<ReLU<T>>());
}

template <class T>
Tensor<T> CedModel<T>::forward(const Tensor<T>& x, bool train) {
  if (x.c() != 1 || x.h() != spec_.input_h || x.w() != spec_.input_w) {
    throw ShapeError("model input " + shape_string(x.shape()) + " does not match " + std::to_string(spec_.input_h) +
                     "x" + std::to_string(spec_.input_w));
  }
  Tensor<T> h = x;
  for (auto& l : layers_) h = l->forward(h, train);
  return h;
}

template <class T>
void CedModel<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

template <class T>
std::vector<Parameter<T>*> CedModel<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->parameters()) out.push_back(p);
  return out;
}

template <class T>
std::vector<Tensor<T>*> CedModel<T>::buffers() {
  std::vector<Tensor<T>*> out;
  for (auto& l : layers_)
    for (auto* b : l->buffers()) out.push_back(b);
  return out;
}

template <class T>
std::size_t CedModel<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

template <class T>
void CedModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <class T>
void CedModel<T>::clear_cache() {
  for (auto& l : layers_) l->clear_cache();
}

template <class T>
std::vector<std::array<int, 3>> CedModel<T>::shape_trace() const {
  std::vector<std::array<int, 3>> out;
  std::array<int, 3> s{1, spec_.input_h, spec_.input_w};
  for (const auto& l : layers_) {
    s = l->output_shape(s);
    out.push_back(s);
  }
  return out;
}

template <class T>
void CedModel<T>::copy_state_from(CedModel& other) {
  auto dst = parameters();
  auto src = other.parameters();
  auto dbuf = buffers();
  auto sbuf = other.buffers();
  if (dst.size() != src.size() || dbuf.size() != sbuf.size()) throw ShapeError("copy_state_from: architecture mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->value.shape() != src[i]->value.shape()) throw ShapeError("copy_state_from: parameter shape mismatch");
    dst[i]->value = src[i]->value;
  }
  for (std::size_t i = 0; i < dbuf.size(); ++i) *dbuf[i] = *sbuf[i];
}

template class CedModel<float>;
template class CedModel<double>;

Tensor<float> to_tensor(const std::vector<const Sinogram*>& batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  const int h = batch.front()->rows(), w = batch.front()->cols();
  Tensor<float> t({static_cast<int>(batch.size()), 1, h, w});
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (batch[n]->rows() != h || batch[n]->cols() != w) throw ShapeError("batch members differ in shape");
    float* dst = t.sample(static_cast<int>(n));
    for (std::size_t i = 0; i < batch[n]->size(); ++i) dst[i] = static_cast<float>((*batch[n])[i]);
  }
  return t;
}

Tensor<float> to_tensor(const std::vector<const Image*>& batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  const int h = batch.front()->rows(), w = batch.front()->cols();
  Tensor<float> t({static_cast<int>(batch.size()), 1, h, w});
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (batch[n]->rows() != h || batch[n]->cols() != w) throw ShapeError("batch members differ in shape");
    float* dst = t.sample(static_cast<int>(n));
    for (std::size_t i = 0; i < batch[n]->size(); ++i) dst[i] = static_cast<float>((*batch[n])[i]);
  }
  return t;
}

std::vector<Image> infer_batch(CedModel<float>& model, const std::vector<const Sinogram*>& batch) {
  const Tensor<float> y = model.forward(to_tensor(batch), false);
  std::vector<Image> out;
  for (int n = 0; n < y.n(); ++n) {
    Image img(y.h(), y.w());
    const float* src = y.sample(n);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = src[i];
    out.push_back(std::move(img));
  }
  return out;
}

Image infer(CedModel<float>& model, const Sinogram& g_hat) { return std::move(infer_batch(model, {&g_hat}).front()); }

}  // namespace deeppet::nn
