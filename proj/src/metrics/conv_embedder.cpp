#include "facegen/metrics/conv_embedder.hpp"

#include <random>

#include "facegen/errors.hpp"
#include "facegen/gan/checkpoint.hpp"
#include "facegen/tensor_image.hpp"

namespace facegen::metrics {

namespace nn = torch::nn;

ConvEmbedderNetImpl::ConvEmbedderNetImpl(const ConvEmbedderConfig& cfg, int targets) {
  nn::Sequential s;
  int in = 3, out = cfg.width;
  for (int res = cfg.resolution; res > 4; res /= 2) {
    s->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
    s->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    s->push_back(nn::AvgPool2d(nn::AvgPool2dOptions(2)));
    in = out;
    out = std::min(out * 2, 128);
  }
  trunk = register_module("trunk", s);
  embed = register_module("embed", nn::Linear(in * 16, cfg.feature_dim));
  head = register_module("head", nn::Linear(cfg.feature_dim, targets));
}

torch::Tensor ConvEmbedderNetImpl::features(const torch::Tensor& images) {
  return torch::tanh(embed->forward(trunk->forward(images).flatten(1)));
}

ConvEmbedder::ConvEmbedder(ConvEmbedderConfig cfg, int targets) : cfg_(cfg), targets_(targets) {
  if (cfg_.resolution < 8 || (cfg_.resolution & (cfg_.resolution - 1)) != 0) {
    throw InvalidArgument("embedder resolution must be a power of two >= 8");
  }
  if (targets_ < 1 || cfg_.feature_dim < 1) throw InvalidArgument("embedder needs targets and features");
  net_ = ConvEmbedderNet(cfg_, targets_);
}

torch::Tensor ConvEmbedder::batch_tensor(std::span<const Image> images) const {
  std::vector<Image> resized;
  resized.reserve(images.size());
  for (const auto& im : images) {
    if (im.channels != 3) throw DimensionMismatch("embedder expects RGB images");
    resized.push_back(im.height == cfg_.resolution && im.width == cfg_.resolution ? im
                                                                                  : resize_square(im, cfg_.resolution));
  }
  return to_tensor(resized);
}

ConvEmbedder ConvEmbedder::train(const std::vector<Image>& images, const std::vector<std::vector<double>>& targets,
                                 const ConvEmbedderConfig& cfg, std::uint64_t seed) {
  if (images.empty() || images.size() != targets.size()) throw InvalidArgument("one target row per image is required");
  const int t = static_cast<int>(targets.front().size());
  torch::manual_seed(seed);
  ConvEmbedder e(cfg, t);
  const auto x = e.batch_tensor(images);
  auto y = torch::empty({static_cast<int64_t>(targets.size()), t}, torch::kFloat32);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (static_cast<int>(targets[i].size()) != t) throw DimensionMismatch("ragged target rows");
    for (int j = 0; j < t; ++j) y[static_cast<int64_t>(i)][j] = targets[i][j];
  }
  torch::optim::Adam opt(e.net_->parameters(), torch::optim::AdamOptions(cfg.lr));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> pick(0, x.size(0) - 1);
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<int64_t> idx(static_cast<std::size_t>(cfg.batch_size));
    for (auto& i : idx) i = pick(rng);
    const auto sel = torch::tensor(idx, torch::kLong);
    opt.zero_grad();
    const auto loss = torch::mse_loss(e.net_->forward(x.index_select(0, sel)), y.index_select(0, sel));
    loss.backward();
    opt.step();
  }
  e.net_->eval();
  e.refresh_id();
  return e;
}

double ConvEmbedder::evaluate(const std::vector<Image>& images, const std::vector<std::vector<double>>& targets) const {
  torch::NoGradGuard guard;
  const auto pred = net_->forward(batch_tensor(images)).to(torch::kFloat64);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t j = 0; j < targets[i].size(); ++j) {
      const double d = pred[static_cast<int64_t>(i)][static_cast<int64_t>(j)].item<double>() - targets[i][j];
      sum += d * d;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::vector<double> ConvEmbedder::embed(const Image& image) const {
  const auto m = embed_all({&image, 1});
  return {m.data(), m.data() + m.size()};
}

Eigen::MatrixXd ConvEmbedder::embed_all(std::span<const Image> images) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), cfg_.feature_dim);
  torch::NoGradGuard guard;
  constexpr std::size_t kChunk = 128;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, images.size() - start);
    const auto f = net_->features(batch_tensor(images.subspan(start, n))).to(torch::kFloat64).contiguous();
    const auto* p = f.data_ptr<double>();
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < cfg_.feature_dim; ++j) out(static_cast<Eigen::Index>(start + i), j) = p[i * cfg_.feature_dim + j];
    }
  }
  return out;
}

void ConvEmbedder::refresh_id() {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : net_->parameters()) {
    const auto c = p.detach().contiguous();
    h = fnv1a64({static_cast<const char*>(c.data_ptr()), static_cast<std::size_t>(c.nbytes())}, h);
  }
  id_ = "conv" + std::to_string(cfg_.feature_dim) + "-" + hex64(h);
}

void ConvEmbedder::save(const std::filesystem::path& path) const {
  gan::TensorArchive a;
  a.meta = {{"kind", "conv_embedder"},
            {"resolution", cfg_.resolution},
            {"width", cfg_.width},
            {"feature_dim", cfg_.feature_dim},
            {"targets", targets_}};
  a.tensors = gan::module_state(*net_);
  gan::save_archive(a, path);
}

ConvEmbedder ConvEmbedder::load(const std::filesystem::path& path) {
  const auto a = gan::load_archive(path);
  if (a.meta.value("kind", "") != "conv_embedder") throw CheckpointError(path.string() + " is not an embedder file");
  ConvEmbedderConfig cfg;
  cfg.resolution = a.meta.at("resolution").get<int>();
  cfg.width = a.meta.at("width").get<int>();
  cfg.feature_dim = a.meta.at("feature_dim").get<int>();
  ConvEmbedder e(cfg, a.meta.at("targets").get<int>());
  gan::load_module_state(*e.net_, a.tensors);
  e.net_->eval();
  e.refresh_id();
  return e;
}

}  // namespace facegen::metrics
