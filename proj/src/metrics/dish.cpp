#include "facegen/metrics/dish.hpp"

#include <cmath>

#include "facegen/errors.hpp"

namespace facegen::metrics {

std::vector<Image> ReplaySource::sample(std::size_t n, std::uint64_t) const {
  if (images_.empty()) throw InvalidArgument("replay source is empty");
  std::vector<Image> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(images_[i % images_.size()]);
  return out;
}

namespace {

std::vector<double> score_all(std::span<const Image> images, const severity::SeverityScorer& scorer,
                              std::size_t& failures) {
  std::vector<double> scores;
  scores.reserve(images.size());
  for (const auto& im : images) {
    try {
      const double s = scorer.score(im);
      if (!std::isfinite(s)) {
        ++failures;
        continue;
      }
      scores.push_back(s);
    } catch (const std::exception&) {
      ++failures;
    }
  }
  return scores;
}

}  // namespace

DishResult dish(std::span<const Image> reals, const ImageSource& fakes, const severity::SeverityScorer& scorer,
                const DishConfig& cfg, std::uint64_t seed) {
  if (reals.empty()) throw InvalidArgument("dish needs a nonempty real set");
  if (cfg.n < cfg.bins) throw InvalidArgument("dish needs n >= bins");
  DishResult r;
  const auto generated = fakes.sample(cfg.n, seed);
  r.fake_scores = score_all(generated, scorer, r.fake_failures);
  r.real_scores = score_all(reals, scorer, r.real_failures);
  if (r.fake_scores.empty() || r.real_scores.empty()) throw DegenerateSet("dish: scorer rejected every image of a set");
  r.fake = build_histogram(r.fake_scores, cfg.bins, cfg.smoothing);
  r.real = build_histogram(r.real_scores, cfg.bins, cfg.smoothing);
  r.value = js_divergence(r.real, r.fake);
  return r;
}

}  // namespace facegen::metrics
