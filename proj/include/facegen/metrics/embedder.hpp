#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "facegen/image.hpp"

namespace facegen::metrics {

/// Deterministic image -> feature vector map used by FID and the default
/// perceptual distance.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(const Image& image) const = 0;
  /// Stable identifier, part of the embedding-cache key.
  virtual std::string id() const = 0;

  /// n x d feature matrix in input order.
  virtual Eigen::MatrixXd embed_all(std::span<const Image> images) const;
};

/// Flattens pixels; useful wherever an analytic answer is needed.
class FlattenEmbedder : public Embedder {
 public:
  explicit FlattenEmbedder(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(const Image& image) const override;
  std::string id() const override { return "flatten-" + std::to_string(dim_); }

 private:
  std::size_t dim_;
};

/// Nonnegative, symmetric, zero on identical images.
class PerceptualDistance {
 public:
  virtual ~PerceptualDistance() = default;
  virtual double distance(const Image& a, const Image& b) const = 0;
};

/// Squared L2 distance between raw pixels.
class PixelSquaredL2 : public PerceptualDistance {
 public:
  double distance(const Image& a, const Image& b) const override;
};

/// Squared L2 distance in an embedder's feature space.
class EmbeddingSquaredL2 : public PerceptualDistance {
 public:
  explicit EmbeddingSquaredL2(const Embedder& embedder) : embedder_(embedder) {}
  double distance(const Image& a, const Image& b) const override;

 private:
  const Embedder& embedder_;
};

/// FNV-1a, used to key caches and configs.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

/// Binary embedding cache: magic, content key, d, n, then n*d doubles
/// (row-major, little endian host order).
void save_embedding_cache(const std::filesystem::path& path, std::uint64_t key, const Eigen::MatrixXd& features);
/// Returns false when the file is missing or was written for another key.
bool load_embedding_cache(const std::filesystem::path& path, std::uint64_t key, Eigen::MatrixXd& features);

}  // namespace facegen::metrics
