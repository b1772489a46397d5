#include "facegen/metrics/ppl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "facegen/errors.hpp"

namespace facegen::metrics {

std::vector<Image> LatentGenerator::synthesize_batch(const std::vector<std::vector<double>>& ws,
                                                     const std::vector<std::uint64_t>& noise_seeds) const {
  std::vector<Image> out;
  out.reserve(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) out.push_back(synthesize(ws[i], noise_seeds[i]));
  return out;
}

std::vector<double> lerp(std::span<const double> a, std::span<const double> b, double t) {
  if (a.size() != b.size()) throw DimensionMismatch("lerp: dimension mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

std::vector<double> slerp(std::span<const double> z1, std::span<const double> z2, double t) {
  if (z1.size() != z2.size()) throw DimensionMismatch("slerp: dimension mismatch");
  const double n1 = std::sqrt(std::inner_product(z1.begin(), z1.end(), z1.begin(), 0.0));
  const double n2 = std::sqrt(std::inner_product(z2.begin(), z2.end(), z2.begin(), 0.0));
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw InvalidArgument("slerp: zero vector");
  if (t == 0.0) return {z1.begin(), z1.end()};
  if (t == 1.0) return {z2.begin(), z2.end()};

  const double cos_omega = std::clamp(std::inner_product(z1.begin(), z1.end(), z2.begin(), 0.0) / (n1 * n2), -1.0, 1.0);
  const double omega = std::acos(cos_omega);
  if (omega < 1e-6) return lerp(z1, z2, t);
  const double s = std::sin(omega);
  const double c1 = std::sin((1.0 - t) * omega) / s;
  const double c2 = std::sin(t * omega) / s;
  std::vector<double> out(z1.size());
  for (std::size_t i = 0; i < z1.size(); ++i) out[i] = c1 * z1[i] + c2 * z2[i];
  return out;
}

PathSpace parse_path_space(const std::string& s) {
  if (s == "slerp_z") return PathSpace::SlerpZ;
  if (s == "lerp_w") return PathSpace::LerpW;
  throw InvalidArgument("unknown PPL interpolation: " + s);
}

namespace {

std::vector<double> unit_normal(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> z(dim);
  double norm = 0.0;
  do {
    for (auto& v : z) v = normal(rng);
    norm = std::sqrt(std::inner_product(z.begin(), z.end(), z.begin(), 0.0));
  } while (norm == 0.0);
  for (auto& v : z) v /= norm;
  return z;
}

}  // namespace

PplResult ppl(const LatentGenerator& generator, const PerceptualDistance& dist, const PPLConfig& cfg,
              std::uint64_t seed) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw InvalidArgument("ppl epsilon must be in (0,1)");
  if (cfg.n_paths == 0) throw InvalidArgument("ppl needs at least one path");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform_t(0.0, 1.0 - cfg.epsilon);
  const std::size_t dim = generator.latent_dim();
  const double inv_eps2 = 1.0 / (cfg.epsilon * cfg.epsilon);

  std::vector<double> samples;
  samples.reserve(cfg.n_paths);
  const std::size_t chunk = std::max<std::size_t>(1, cfg.batch_paths);
  for (std::size_t start = 0; start < cfg.n_paths; start += chunk) {
    const std::size_t count = std::min(chunk, cfg.n_paths - start);
    std::vector<std::vector<double>> ws;
    std::vector<std::uint64_t> noise;
    ws.reserve(2 * count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto z1 = unit_normal(dim, rng);
      const auto z2 = unit_normal(dim, rng);
      const double t = uniform_t(rng);
      const std::uint64_t noise_seed = rng();
      if (cfg.interpolation == PathSpace::SlerpZ) {
        ws.push_back(generator.map(slerp(z1, z2, t)));
        ws.push_back(generator.map(slerp(z1, z2, t + cfg.epsilon)));
      } else {
        const auto w1 = generator.map(z1);
        const auto w2 = generator.map(z2);
        ws.push_back(lerp(w1, w2, t));
        ws.push_back(lerp(w1, w2, t + cfg.epsilon));
      }
      noise.push_back(noise_seed);
      noise.push_back(noise_seed);
    }
    const auto images = generator.synthesize_batch(ws, noise);
    for (std::size_t i = 0; i < count; ++i) samples.push_back(dist.distance(images[2 * i], images[2 * i + 1]) * inv_eps2);
  }

  PplResult r;
  r.n = samples.size();
  r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(r.n);
  if (r.n > 1) {
    double var = 0.0;
    for (double s : samples) var += (s - r.mean) * (s - r.mean);
    var /= static_cast<double>(r.n - 1);
    r.std_error = std::sqrt(var / static_cast<double>(r.n));
  }
  return r;
}

}  // namespace facegen::metrics
