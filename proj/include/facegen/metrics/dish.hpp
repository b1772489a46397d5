#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "facegen/image.hpp"
#include "facegen/metrics/divergence.hpp"
#include "facegen/severity/scorer.hpp"

namespace facegen::metrics {

/// Anything that can produce n images for a seed (a trained generator, a
/// replay of stored images, a test double).
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual std::vector<Image> sample(std::size_t n, std::uint64_t seed) const = 0;
};

/// Replays a fixed image list in order, cycling if n exceeds its length.
class ReplaySource : public ImageSource {
 public:
  explicit ReplaySource(std::vector<Image> images) : images_(std::move(images)) {}
  std::vector<Image> sample(std::size_t n, std::uint64_t seed) const override;

 private:
  std::vector<Image> images_;
};

struct DishConfig {
  std::size_t n = 514;
  std::size_t bins = 20;
  double smoothing = 1e-6;
};

struct DishResult {
  double value = 0.0;
  SeverityHistogram real;
  SeverityHistogram fake;
  std::vector<double> real_scores;
  std::vector<double> fake_scores;
  std::size_t real_failures = 0;
  std::size_t fake_failures = 0;
};

/// Divergence index of severity histograms:
///   1. draw n fakes from `fakes`
///   2. score every fake
///   3. score every real image
///   4. histogram both score sets on the same edges over [0, 1]
///   5. return the Jensen-Shannon divergence of the two histograms.
/// Images the scorer rejects (throws, or returns a non-finite value) are
/// excluded and counted.
DishResult dish(std::span<const Image> reals, const ImageSource& fakes, const severity::SeverityScorer& scorer,
                const DishConfig& cfg, std::uint64_t seed);

}  // namespace facegen::metrics
