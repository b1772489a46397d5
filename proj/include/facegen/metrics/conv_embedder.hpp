#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "facegen/metrics/embedder.hpp"

namespace facegen::metrics {

struct ConvEmbedderConfig {
  int resolution = 32;
  int width = 16;  // channels of the first conv; doubled at each downsampling
  int feature_dim = 64;
  int steps = 800;
  int batch_size = 32;
  double lr = 1e-3;
};

class ConvEmbedderNetImpl : public torch::nn::Module {
 public:
  ConvEmbedderNetImpl(const ConvEmbedderConfig& cfg, int targets);
  torch::Tensor features(const torch::Tensor& images);
  torch::Tensor forward(const torch::Tensor& images) { return head->forward(features(images)); }

  torch::nn::Sequential trunk{nullptr};
  torch::nn::Linear embed{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(ConvEmbedderNet);

/// Small convolutional network trained to regress per-image attributes
/// (the synthetic-face parameters), then frozen. Its penultimate layer is
/// the feature vector used for FID and the perceptual distance.
class ConvEmbedder : public Embedder {
 public:
  /// images in [-1, 1]; one target row per image.
  static ConvEmbedder train(const std::vector<Image>& images, const std::vector<std::vector<double>>& targets,
                            const ConvEmbedderConfig& cfg, std::uint64_t seed);
  static ConvEmbedder load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t dim() const override { return static_cast<std::size_t>(cfg_.feature_dim); }
  std::vector<double> embed(const Image& image) const override;
  Eigen::MatrixXd embed_all(std::span<const Image> images) const override;
  std::string id() const override { return id_; }

  /// Mean squared regression error on a labelled set.
  double evaluate(const std::vector<Image>& images, const std::vector<std::vector<double>>& targets) const;
  const ConvEmbedderConfig& config() const { return cfg_; }

 private:
  ConvEmbedder(ConvEmbedderConfig cfg, int targets);
  torch::Tensor batch_tensor(std::span<const Image> images) const;
  void refresh_id();

  ConvEmbedderConfig cfg_;
  int targets_;
  mutable ConvEmbedderNet net_{nullptr};
  std::string id_;
};

}  // namespace facegen::metrics
