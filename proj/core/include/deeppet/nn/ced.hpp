#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "deeppet/nn/layers.hpp"
#include "deeppet/nn/optim.hpp"
#include "deeppet/raster.hpp"

namespace deeppet::nn {

/// Convolutional encoder-decoder description.
///
/// Encoder: `stem_convs` stride-1 convs (1 -> base_features), then
/// `downsample_blocks` blocks of one stride-2 conv that doubles the width and
/// `convs_per_encoder_block - 1` stride-1 convs. Decoder: `decoder_steps`
/// steps of bilinear upsampling followed by a conv that halves the width and
/// `convs_per_decoder_block - 1` further convs; a final conv maps to one
/// channel. Every conv but the last is followed by batch norm and ReLU; the
/// last is followed by ReLU only.
struct CedSpec {
  std::string name = "custom";
  int input_h = 0;
  int input_w = 0;
  int output_h = 0;
  int output_w = 0;
  int stem_convs = 1;
  int base_features = 16;
  int downsample_blocks = 4;
  int convs_per_encoder_block = 1;
  int decoder_steps = 4;
  int convs_per_decoder_block = 1;
  OptimizerKind optimizer = OptimizerKind::SgdMomentum;
  double bn_momentum = 0.2;

  int bottleneck_features() const { return base_features << downsample_blocks; }
  int decoder_output_features() const { return bottleneck_features() >> decoder_steps; }
  int conv_count() const {
    return stem_convs + downsample_blocks * convs_per_encoder_block + decoder_steps * convs_per_decoder_block + 1;
  }
  /// Encoder spatial sizes after each downsampling block (ceil halving).
  std::vector<std::pair<int, int>> encoder_sizes() const;
  /// Spatial sizes after each decoder upsampling: round(b * (out / b)^(k / steps)).
  std::vector<std::pair<int, int>> decoder_sizes() const;

  void validate() const;
};

/// Named presets. Paper-scale input is 288 x 269, output 128 x 128.
/// "deeppet", "m1".."m7" follow the conv-layer / feature-layer / optimiser
/// table of the original study; "toy" is the 96 x 95 -> 64 x 64 desk preset.
CedSpec ced_preset(std::string_view name);
std::vector<std::string> ced_preset_names();
/// Same architecture with a different input/output geometry.
CedSpec with_io(CedSpec spec, int input_h, int input_w, int output_h, int output_w);

/// Instantiated network.
template <class T>
class CedModel {
 public:
  CedModel(const CedSpec& spec, std::uint64_t seed);

  const CedSpec& spec() const { return spec_; }
  Tensor<T> forward(const Tensor<T>& x, bool train);
  /// Back-propagates from dL/d(output); parameter gradients accumulate.
  void backward(const Tensor<T>& grad_out);

  std::vector<Parameter<T>*> parameters();
  std::vector<Tensor<T>*> buffers();
  std::size_t parameter_count();
  void zero_grad();
  void clear_cache();

  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }
  /// Index one past the last encoder layer.
  std::size_t encoder_end() const { return encoder_end_; }
  /// (C, H, W) after every layer for an input of (1, input_h, input_w).
  std::vector<std::array<int, 3>> shape_trace() const;
  std::array<int, 3> bottleneck_shape() const { return shape_trace()[encoder_end_ - 1]; }
  std::array<int, 3> output_shape() const { return shape_trace().back(); }

  /// Copies values (parameters then buffers) from another model of the same spec.
  void copy_state_from(CedModel& other);

 private:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  CedSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::size_t encoder_end_ = 0;
};

template <class T>
CedModel<T> build_ced(const CedSpec& spec, std::uint64_t seed) {
  return CedModel<T>(spec, seed);
}

/// Eval-mode forward pass of one precorrected, cropped sinogram.
Image infer(CedModel<float>& model, const Sinogram& g_hat);
/// Eval-mode forward pass of a batch; same results as one-by-one inference.
std::vector<Image> infer_batch(CedModel<float>& model, const std::vector<const Sinogram*>& batch);

Tensor<float> to_tensor(const std::vector<const Sinogram*>& batch);
Tensor<float> to_tensor(const std::vector<const Image*>& batch);

}  // namespace deeppet::nn
