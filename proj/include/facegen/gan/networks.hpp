#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "facegen/gan/config.hpp"

namespace facegen::gan {

/// Fully connected layer with equalized learning rate: weights are stored
/// at unit scale and multiplied by lr_mult / sqrt(fan_in) at run time.
class EqualLinearImpl : public torch::nn::Module {
 public:
  EqualLinearImpl(int in, int out, double bias_init = 0.0, double lr_mult = 1.0, bool activate = false);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  double weight_gain_;
  double bias_gain_;
  bool activate_;
};
TORCH_MODULE(EqualLinear);

/// Equalized-LR convolution (stride 1, same padding) with optional
/// resampling after the convolution.
class EqualConv2dImpl : public torch::nn::Module {
 public:
  EqualConv2dImpl(int in, int out, int kernel, bool bias, bool activate, bool down, bool filtered);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  int kernel_;
  bool activate_;
  bool down_;
  bool filtered_;
  double gain_;
};
TORCH_MODULE(EqualConv2d);

/// z -> w: second-moment normalization followed by a stack of leaky-ReLU
/// equalized layers. Tracks a running mean of w for truncation.
class MappingNetworkImpl : public torch::nn::Module {
 public:
  explicit MappingNetworkImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& z);
  /// psi = 1 returns w unchanged.
  torch::Tensor truncate(const torch::Tensor& w, double psi) const;
  void update_w_avg(const torch::Tensor& w, double beta);

  torch::Tensor w_avg;

 private:
  std::vector<EqualLinear> layers_;
};
TORCH_MODULE(MappingNetwork);

/// Style-modulated convolution: per-sample input scaling by the affine
/// style, shared-weight convolution, optional demodulation.
class ModulatedConvImpl : public torch::nn::Module {
 public:
  ModulatedConvImpl(int in, int out, int kernel, int w_dim, bool demodulate, bool up, bool filtered);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& w);

  torch::Tensor weight;
  EqualLinear affine{nullptr};

 private:
  int in_;
  int kernel_;
  bool demodulate_;
  bool up_;
  bool filtered_;
};
TORCH_MODULE(ModulatedConv);

class SynthesisLayerImpl : public torch::nn::Module {
 public:
  SynthesisLayerImpl(int in, int out, int w_dim, int resolution, bool up, bool filtered);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& w, const torch::Tensor& noise);

  int resolution() const { return resolution_; }

  ModulatedConv conv{nullptr};
  torch::Tensor noise_strength;
  torch::Tensor bias;

 private:
  int resolution_;
};
TORCH_MODULE(SynthesisLayer);

class ToRGBImpl : public torch::nn::Module {
 public:
  ToRGBImpl(int in, int w_dim);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& w);

  ModulatedConv conv{nullptr};
  torch::Tensor bias;
};
TORCH_MODULE(ToRGB);

/// Learned 4x4 constant grown to the output resolution by blocks of
/// (upsample, modulated conv, noise, nonlinearity), with skip-connected RGB
/// outputs squashed to [-1, 1] by tanh.
class SynthesisNetworkImpl : public torch::nn::Module {
 public:
  explicit SynthesisNetworkImpl(const ModelConfig& cfg);
  /// `noise` holds one N x 1 x H x W tensor per layer (see noise_shapes).
  torch::Tensor forward(const torch::Tensor& w, const std::vector<torch::Tensor>& noise);
  /// Resolution of each layer's noise input, in layer order.
  std::vector<int> noise_resolutions() const;

  torch::Tensor constant;

 private:
  ModelConfig cfg_;
  std::vector<SynthesisLayer> layers_;
  std::vector<ToRGB> torgb_;
};
TORCH_MODULE(SynthesisNetwork);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ModelConfig& cfg);

  torch::Tensor map(const torch::Tensor& z);
  torch::Tensor synthesize(const torch::Tensor& w, const std::vector<torch::Tensor>& noise);
  /// Per-layer noise for a batch; item i draws from its own seeded stream so
  /// results do not depend on batch composition.
  std::vector<torch::Tensor> make_noise(const std::vector<std::uint64_t>& seeds,
                                        torch::TensorOptions options = torch::kFloat32) const;
  torch::Tensor forward(const torch::Tensor& z, const std::vector<std::uint64_t>& noise_seeds);

  const ModelConfig& config() const { return cfg_; }

  MappingNetwork mapping{nullptr};
  SynthesisNetwork synthesis{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(Generator);

/// Residual downsampling stack ending in minibatch-stddev, conv and two
/// fully connected layers producing one logit per image.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& images);

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  EqualConv2d from_rgb_{nullptr};
  std::vector<EqualConv2d> conv0_;
  std::vector<EqualConv2d> conv1_;
  std::vector<EqualConv2d> skip_;
  EqualConv2d epilogue_conv_{nullptr};
  EqualLinear fc_{nullptr};
  EqualLinear out_{nullptr};
};
TORCH_MODULE(Discriminator);

torch::Tensor upsample2x(const torch::Tensor& x, bool filtered);
torch::Tensor downsample2x(const torch::Tensor& x, bool filtered);
torch::Tensor minibatch_stddev(const torch::Tensor& x, int group);

}  // namespace facegen::gan
