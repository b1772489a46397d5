#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "facegen/gan/checkpoint.hpp"
#include "facegen/gan/networks.hpp"
#include "facegen/image.hpp"
#include "facegen/metrics/dish.hpp"
#include "facegen/metrics/ppl.hpp"

namespace facegen::gan {

struct GeneratedBatch {
  std::vector<Image> images;  // values in [-1, 1]
  std::vector<std::vector<double>> latents;
  std::vector<std::uint64_t> noise_seeds;
};

/// Draws n latents from the model prior and synthesizes them with the
/// configured truncation. Latent i and its noise seed depend only on
/// (seed, i), so generate_batch(n, s) is a prefix of generate_batch(n + k, s).
GeneratedBatch generate_batch(Generator& generator, std::size_t n, std::uint64_t seed);

/// `index,noise_seed,z0,...` with round-trip precision.
void write_latent_log(const GeneratedBatch& batch, const std::filesystem::path& path);

/// Generator exposed to the metrics: map() applies the mapping network and
/// truncation, synthesize() the synthesis network with seeded noise, and
/// sample() draws fresh latents from the prior.
class GeneratorSampler : public metrics::LatentGenerator, public metrics::ImageSource {
 public:
  explicit GeneratorSampler(Generator generator, std::size_t chunk = 64);
  explicit GeneratorSampler(const Checkpoint& ckpt, std::size_t chunk = 64);

  std::size_t latent_dim() const override;
  std::vector<double> map(std::span<const double> z) const override;
  Image synthesize(std::span<const double> w, std::uint64_t noise_seed) const override;
  std::vector<Image> synthesize_batch(const std::vector<std::vector<double>>& ws,
                                      const std::vector<std::uint64_t>& noise_seeds) const override;
  std::vector<Image> sample(std::size_t n, std::uint64_t seed) const override;

  Generator& generator() const { return generator_; }

 private:
  mutable Generator generator_;
  std::size_t chunk_;
};

}  // namespace facegen::gan
