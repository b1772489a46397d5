#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace facegen::metrics {

/// Normalized histogram over [0, 1] with explicit, shared bin edges.
struct SeverityHistogram {
  std::vector<double> bin_edges;  // size bins + 1
  std::vector<double> weights;    // size bins, sums to 1
  std::size_t n_samples = 0;

  std::size_t bins() const { return weights.size(); }
};

std::vector<double> uniform_edges(std::size_t bins);

/// Counts values into the shared edges (the last bin is closed), adds
/// `smoothing` to every bin and normalizes. Values outside [0,1] are clamped.
SeverityHistogram build_histogram(std::span<const double> values, std::size_t bins, double smoothing);

double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Jensen-Shannon divergence in nats, in [0, ln 2]. Terms with zero mass
/// contribute nothing. Throws InvalidArgument on mismatched lengths, negative
/// weights or weights not summing to 1 within 1e-9.
double js_divergence(std::span<const double> p, std::span<const double> q);

/// Also requires identical bin edges.
double js_divergence(const SeverityHistogram& p, const SeverityHistogram& q);

}  // namespace facegen::metrics
