#include "facegen/gan/networks.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "facegen/errors.hpp"

namespace facegen::gan {

namespace F = torch::nn::functional;

namespace {

constexpr double kLeakySlope = 0.2;
const double kActGain = std::sqrt(2.0);

torch::Tensor lrelu(const torch::Tensor& x) { return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope)) * kActGain; }

// separable, normalized 1-D taps -> C x 1 x k x k depthwise kernel
torch::Tensor depthwise_kernel(std::initializer_list<double> taps, int64_t channels, double gain,
                               const torch::TensorOptions& options) {
  auto t = torch::tensor(std::vector<double>(taps), options.requires_grad(false));
  t = t / t.sum();
  auto k2 = torch::outer(t, t) * gain;
  return k2.view({1, 1, k2.size(0), k2.size(1)}).repeat({channels, 1, 1, 1});
}

}  // namespace

torch::Tensor upsample2x(const torch::Tensor& x, bool filtered) {
  const int64_t c = x.size(1);
  if (filtered) {
    const auto k = depthwise_kernel({1, 5, 10, 10, 5, 1}, c, 4.0, x.options());
    return F::conv_transpose2d(x, k, F::ConvTranspose2dFuncOptions().stride(2).padding(2).groups(c));
  }
  const auto k = depthwise_kernel({1, 3, 3, 1}, c, 4.0, x.options());
  return F::conv_transpose2d(x, k, F::ConvTranspose2dFuncOptions().stride(2).padding(1).groups(c));
}

torch::Tensor downsample2x(const torch::Tensor& x, bool filtered) {
  if (!filtered) return F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
  const int64_t c = x.size(1);
  const auto k = depthwise_kernel({1, 3, 3, 1}, c, 1.0, x.options());
  return F::conv2d(x, k, F::Conv2dFuncOptions().stride(2).padding(1).groups(c));
}

torch::Tensor minibatch_stddev(const torch::Tensor& x, int group) {
  const int64_t n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  int64_t g = std::min<int64_t>(group, n);
  if (n % g != 0) g = 1;
  auto y = x.reshape({g, n / g, c, h, w});
  y = y - y.mean(0);
  y = (y.square().mean(0) + 1e-8).sqrt();
  y = y.mean({1, 2, 3});                                  // n/g
  y = y.reshape({n / g, 1, 1, 1}).repeat({g, 1, h, w});  // n x 1 x h x w
  return torch::cat({x, y}, 1);
}

EqualLinearImpl::EqualLinearImpl(int in, int out, double bias_init, double lr_mult, bool activate)
    : weight_gain_(lr_mult / std::sqrt(static_cast<double>(in))), bias_gain_(lr_mult), activate_(activate) {
  weight = register_parameter("weight", torch::randn({out, in}) / lr_mult);
  bias = register_parameter("bias", torch::full({out}, bias_init / lr_mult));
}

torch::Tensor EqualLinearImpl::forward(const torch::Tensor& x) {
  auto y = F::linear(x, weight * weight_gain_, bias * bias_gain_);
  return activate_ ? lrelu(y) : y;
}

EqualConv2dImpl::EqualConv2dImpl(int in, int out, int kernel, bool use_bias, bool activate, bool down, bool filtered)
    : kernel_(kernel), activate_(activate), down_(down), filtered_(filtered),
      gain_(1.0 / std::sqrt(static_cast<double>(in * kernel * kernel))) {
  weight = register_parameter("weight", torch::randn({out, in, kernel, kernel}));
  if (use_bias) bias = register_parameter("bias", torch::zeros({out}));
}

torch::Tensor EqualConv2dImpl::forward(const torch::Tensor& x) {
  auto y = F::conv2d(x, weight * gain_, F::Conv2dFuncOptions().padding(kernel_ / 2));
  if (down_) y = downsample2x(y, filtered_);
  if (bias.defined()) y = y + bias.view({1, -1, 1, 1});
  return activate_ ? lrelu(y) : y;
}

MappingNetworkImpl::MappingNetworkImpl(const ModelConfig& cfg) {
  int in = cfg.latent_dim;
  for (int i = 0; i < cfg.mapping_layers; ++i) {
    layers_.push_back(register_module("fc" + std::to_string(i),
                                      EqualLinear(in, cfg.w_dim, 0.0, cfg.mapping_lr_multiplier, true)));
    in = cfg.w_dim;
  }
  w_avg = register_buffer("w_avg", torch::zeros({cfg.w_dim}));
}

torch::Tensor MappingNetworkImpl::forward(const torch::Tensor& z) {
  auto x = z * (z.square().mean(1, true) + 1e-8).rsqrt();
  for (auto& layer : layers_) x = layer->forward(x);
  return x;
}

torch::Tensor MappingNetworkImpl::truncate(const torch::Tensor& w, double psi) const {
  if (psi == 1.0) return w;
  return w_avg + (w - w_avg) * psi;
}

void MappingNetworkImpl::update_w_avg(const torch::Tensor& w, double beta) {
  torch::NoGradGuard guard;
  w_avg.copy_(w.detach().mean(0).lerp(w_avg, beta));
}

ModulatedConvImpl::ModulatedConvImpl(int in, int out, int kernel, int w_dim, bool demodulate, bool up, bool filtered)
    : in_(in), kernel_(kernel), demodulate_(demodulate), up_(up), filtered_(filtered) {
  weight = register_parameter("weight", torch::randn({out, in, kernel, kernel}));
  affine = register_module("affine", EqualLinear(w_dim, in, 1.0));
}

torch::Tensor ModulatedConvImpl::forward(const torch::Tensor& x, const torch::Tensor& w) {
  const int64_t n = x.size(0);
  const auto styles = affine->forward(w);  // n x in
  const auto wgt = weight * (1.0 / std::sqrt(static_cast<double>(in_ * kernel_ * kernel_)));
  auto y = x * styles.view({n, -1, 1, 1});
  if (up_) y = upsample2x(y, filtered_);
  y = F::conv2d(y, wgt, F::Conv2dFuncOptions().padding(kernel_ / 2));
  if (demodulate_) {
    // sum over (in, k, k) of (weight * style)^2 for every (sample, out)
    const auto wsq = wgt.square().sum({2, 3});                    // out x in
    const auto d = (torch::matmul(styles.square(), wsq.t()) + 1e-8).rsqrt();  // n x out
    y = y * d.view({n, -1, 1, 1});
  }
  return y;
}

SynthesisLayerImpl::SynthesisLayerImpl(int in, int out, int w_dim, int resolution, bool up, bool filtered)
    : resolution_(resolution) {
  conv = register_module("conv", ModulatedConv(in, out, 3, w_dim, true, up, filtered));
  noise_strength = register_parameter("noise_strength", torch::zeros({1}));
  bias = register_parameter("bias", torch::zeros({out}));
}

torch::Tensor SynthesisLayerImpl::forward(const torch::Tensor& x, const torch::Tensor& w, const torch::Tensor& noise) {
  auto y = conv->forward(x, w);
  if (noise.defined()) y = y + noise * noise_strength;
  return lrelu(y + bias.view({1, -1, 1, 1}));
}

ToRGBImpl::ToRGBImpl(int in, int w_dim) {
  conv = register_module("conv", ModulatedConv(in, 3, 1, w_dim, false, false, false));
  bias = register_parameter("bias", torch::zeros({3}));
}

torch::Tensor ToRGBImpl::forward(const torch::Tensor& x, const torch::Tensor& w) {
  return conv->forward(x, w) + bias.view({1, -1, 1, 1});
}

SynthesisNetworkImpl::SynthesisNetworkImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int base = cfg.base_resolution;
  constant = register_parameter("constant", torch::randn({cfg.channels(base), base, base}));
  int idx = 0;
  auto add_layer = [&](int in, int out, int res, bool up) {
    layers_.push_back(register_module("layer" + std::to_string(idx++),
                                      SynthesisLayer(in, out, cfg.w_dim, res, up, cfg.filtered_resampling)));
  };
  add_layer(cfg.channels(base), cfg.channels(base), base, false);
  torgb_.push_back(register_module("torgb" + std::to_string(base), ToRGB(cfg.channels(base), cfg.w_dim)));
  for (int res = base * 2; res <= cfg.output_resolution; res *= 2) {
    add_layer(cfg.channels(res / 2), cfg.channels(res), res, true);
    add_layer(cfg.channels(res), cfg.channels(res), res, false);
    torgb_.push_back(register_module("torgb" + std::to_string(res), ToRGB(cfg.channels(res), cfg.w_dim)));
  }
}

std::vector<int> SynthesisNetworkImpl::noise_resolutions() const {
  std::vector<int> out;
  for (const auto& l : layers_) out.push_back(l->resolution());
  return out;
}

torch::Tensor SynthesisNetworkImpl::forward(const torch::Tensor& w, const std::vector<torch::Tensor>& noise) {
  if (!noise.empty() && noise.size() != layers_.size()) throw DimensionMismatch("synthesis: wrong number of noise inputs");
  const int64_t n = w.size(0);
  auto noise_at = [&](std::size_t i) { return noise.empty() ? torch::Tensor() : noise[i]; };
  auto x = constant.unsqueeze(0).expand({n, -1, -1, -1});
  x = layers_[0]->forward(x, w, noise_at(0));
  auto img = torgb_[0]->forward(x, w);
  std::size_t li = 1;
  for (std::size_t b = 1; b < torgb_.size(); ++b) {
    x = layers_[li]->forward(x, w, noise_at(li));
    ++li;
    x = layers_[li]->forward(x, w, noise_at(li));
    ++li;
    img = upsample2x(img, cfg_.filtered_resampling) + torgb_[b]->forward(x, w);
  }
  return torch::tanh(img);
}

GeneratorImpl::GeneratorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  mapping = register_module("mapping", MappingNetwork(cfg));
  synthesis = register_module("synthesis", SynthesisNetwork(cfg));
}

torch::Tensor GeneratorImpl::map(const torch::Tensor& z) {
  if (z.dim() != 2 || z.size(1) != cfg_.latent_dim) throw DimensionMismatch("latent has wrong dimension");
  return mapping->truncate(mapping->forward(z), cfg_.truncation_psi);
}

torch::Tensor GeneratorImpl::synthesize(const torch::Tensor& w, const std::vector<torch::Tensor>& noise) {
  if (w.dim() != 2 || w.size(1) != cfg_.w_dim) throw DimensionMismatch("style vector has wrong dimension");
  return synthesis->forward(w, noise);
}

std::vector<torch::Tensor> GeneratorImpl::make_noise(const std::vector<std::uint64_t>& seeds,
                                                     torch::TensorOptions options) const {
  const auto resolutions = synthesis->noise_resolutions();
  std::vector<std::vector<torch::Tensor>> per_layer(resolutions.size());
  for (const auto seed : seeds) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (std::size_t l = 0; l < resolutions.size(); ++l) {
      per_layer[l].push_back(torch::randn({1, 1, resolutions[l], resolutions[l]}, gen, torch::TensorOptions().dtype(torch::kFloat32)).to(options.dtype()));
    }
  }
  std::vector<torch::Tensor> out;
  out.reserve(resolutions.size());
  for (auto& parts : per_layer) out.push_back(torch::cat(parts, 0));
  return out;
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& z, const std::vector<std::uint64_t>& noise_seeds) {
  return synthesize(map(z), make_noise(noise_seeds, z.options()));
}

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const bool f = cfg.filtered_resampling;
  const int top = cfg.output_resolution;
  from_rgb_ = register_module("from_rgb", EqualConv2d(3, cfg.channels(top), 1, true, true, false, f));
  for (int res = top; res > cfg.base_resolution; res /= 2) {
    const int cin = cfg.channels(res), cout = cfg.channels(res / 2);
    const std::string tag = std::to_string(res);
    conv0_.push_back(register_module("b" + tag + "_conv0", EqualConv2d(cin, cin, 3, true, true, false, f)));
    conv1_.push_back(register_module("b" + tag + "_conv1", EqualConv2d(cin, cout, 3, true, true, true, f)));
    skip_.push_back(register_module("b" + tag + "_skip", EqualConv2d(cin, cout, 1, false, false, true, f)));
  }
  const int cb = cfg.channels(cfg.base_resolution);
  epilogue_conv_ = register_module("epilogue_conv", EqualConv2d(cb + 1, cb, 3, true, true, false, f));
  fc_ = register_module("fc", EqualLinear(cb * cfg.base_resolution * cfg.base_resolution, cb, 0.0, 1.0, true));
  out_ = register_module("out", EqualLinear(cb, 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(2) != cfg_.output_resolution || images.size(3) != cfg_.output_resolution) {
    throw DimensionMismatch("discriminator input has wrong shape");
  }
  auto x = from_rgb_->forward(images);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t b = 0; b < conv0_.size(); ++b) {
    const auto s = skip_[b]->forward(x);
    x = conv1_[b]->forward(conv0_[b]->forward(x));
    x = (x + s) * inv_sqrt2;
  }
  x = minibatch_stddev(x, cfg_.mbstd_group);
  x = epilogue_conv_->forward(x);
  x = fc_->forward(x.flatten(1));
  return out_->forward(x).view({-1});
}

}  // namespace facegen::gan
