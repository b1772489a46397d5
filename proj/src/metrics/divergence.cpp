#include "facegen/metrics/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "facegen/errors.hpp"

namespace facegen::metrics {

std::vector<double> uniform_edges(std::size_t bins) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) edges[i] = static_cast<double>(i) / static_cast<double>(bins);
  return edges;
}

SeverityHistogram build_histogram(std::span<const double> values, std::size_t bins, double smoothing) {
  if (smoothing < 0.0) throw InvalidArgument("negative histogram smoothing");
  SeverityHistogram h;
  h.bin_edges = uniform_edges(bins);
  std::vector<double> counts(bins, smoothing);
  for (double v : values) {
    const double c = std::clamp(v, 0.0, 1.0);
    const auto idx = std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
    counts[idx] += 1.0;
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) throw InvalidArgument("empty histogram without smoothing");
  h.weights.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) h.weights[i] = counts[i] / total;
  h.n_samples = values.size();
  return h;
}

namespace {

void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " has negative or non-finite mass");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument(std::string(name) + " is not normalized");
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("kl_divergence: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("js_divergence: binning mismatch");
  check_distribution(p, "p");
  check_distribution(q, "q");
  // accumulate both halves per bin so JS(p,q) and JS(q,p) see identical sums
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double z = 0.5 * (p[i] + q[i]);
    const double a = p[i] > 0.0 ? p[i] * std::log(p[i] / z) : 0.0;
    const double b = q[i] > 0.0 ? q[i] * std::log(q[i] / z) : 0.0;
    acc += a + b;
  }
  return std::clamp(0.5 * acc, 0.0, std::log(2.0));
}

double js_divergence(const SeverityHistogram& p, const SeverityHistogram& q) {
  if (p.bin_edges != q.bin_edges) throw InvalidArgument("js_divergence: histograms use different bin edges");
  return js_divergence(std::span<const double>(p.weights), std::span<const double>(q.weights));
}

}  // namespace facegen::metrics
