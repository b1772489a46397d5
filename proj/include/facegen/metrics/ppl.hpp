#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "facegen/image.hpp"
#include "facegen/metrics/embedder.hpp"

namespace facegen::metrics {

/// A latent -> image model seen through the two halves the metrics care
/// about: the latent -> style map and style -> image synthesis.
class LatentGenerator {
 public:
  virtual ~LatentGenerator() = default;
  virtual std::size_t latent_dim() const = 0;
  /// Default mapping is the identity.
  virtual std::vector<double> map(std::span<const double> z) const { return {z.begin(), z.end()}; }
  virtual Image synthesize(std::span<const double> w, std::uint64_t noise_seed) const = 0;
  /// Default loops over synthesize.
  virtual std::vector<Image> synthesize_batch(const std::vector<std::vector<double>>& ws,
                                              const std::vector<std::uint64_t>& noise_seeds) const;
};

/// Spherical interpolation along the great circle; falls back to linear
/// interpolation when the endpoints are within 1e-6 rad. t = 0 and t = 1
/// return the endpoints exactly. Throws InvalidArgument on zero vectors.
std::vector<double> slerp(std::span<const double> z1, std::span<const double> z2, double t);

std::vector<double> lerp(std::span<const double> a, std::span<const double> b, double t);

enum class PathSpace { SlerpZ, LerpW };

PathSpace parse_path_space(const std::string& s);

struct PPLConfig {
  double epsilon = 1e-4;
  std::size_t n_paths = 1000;
  PathSpace interpolation = PathSpace::SlerpZ;
  std::size_t batch_paths = 50;
};

struct PplResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Monte-Carlo estimate of E[d(G(path(t)), G(path(t + eps))) / eps^2].
/// Endpoints are standard-normal latents projected to the unit sphere
/// (SlerpZ) or their mapped styles (LerpW); t ~ U[0, 1 - eps). Both images of
/// a pair share a noise seed.
PplResult ppl(const LatentGenerator& generator, const PerceptualDistance& dist, const PPLConfig& cfg,
              std::uint64_t seed);

}  // namespace facegen::metrics
