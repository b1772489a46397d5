#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "facegen/image.hpp"

namespace facegen::severity {

/// Maps an aligned face image (values in [-1, 1]) to a severity index in
/// [0, 1]. Implementations must be deterministic.
class SeverityScorer {
 public:
  virtual ~SeverityScorer() = default;
  virtual double score(const Image& image) const = 0;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
};

enum class PatchMetric { L2, GradientL2 };

PatchMetric parse_patch_metric(const std::string& s);
std::string to_string(PatchMetric m);

struct AsymmetryProxyConfig {
  // lower-face region, fractions of width / height
  double roi_x0 = 0.2;
  double roi_y0 = 0.6;
  double roi_x1 = 0.8;
  double roi_y1 = 1.0;
  double mirror_axis = 0.5;  // fraction of width
  PatchMetric patch_metric = PatchMetric::L2;
  double lo = 0.0;  // calibration percentiles of the raw distance
  double hi = 1.0;

  void validate() const;
};

/// Mean squared difference between the region of interest and its mirror
/// image about the vertical axis (or between their finite-difference
/// gradients for PatchMetric::GradientL2). Exactly 0 for bilaterally
/// symmetric input.
double raw_asymmetry(const Image& image, const AsymmetryProxyConfig& cfg);

/// raw_asymmetry rescaled by (lo, hi) and clamped to [0, 1].
double proxy_score(const Image& image, const AsymmetryProxyConfig& cfg);

/// Sets (lo, hi) to the 1st / 99th percentiles of the raw scores of
/// `reference`. Needs at least 50 images; throws DegenerateSet when all raw
/// scores are equal.
AsymmetryProxyConfig calibrate(const AsymmetryProxyConfig& cfg, std::span<const Image> reference);

/// Linear-interpolated percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

class AsymmetryProxyScorer : public SeverityScorer {
 public:
  explicit AsymmetryProxyScorer(AsymmetryProxyConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  double score(const Image& image) const override { return proxy_score(image, cfg_); }
  std::string name() const override { return "asymmetry_proxy"; }
  std::string version() const override { return "1"; }
  const AsymmetryProxyConfig& config() const { return cfg_; }

 private:
  AsymmetryProxyConfig cfg_;
};

using ScorerOptions = std::map<std::string, std::string>;
using ScorerFactory = std::function<std::unique_ptr<SeverityScorer>(const ScorerOptions&)>;

/// Name -> factory table. `asymmetry_proxy` is registered by default.
class ScorerRegistry {
 public:
  static ScorerRegistry& instance();
  void add(const std::string& name, ScorerFactory factory);
  std::unique_ptr<SeverityScorer> create(const std::string& name, const ScorerOptions& options = {}) const;
  std::vector<std::string> names() const;

 private:
  ScorerRegistry();
  std::map<std::string, ScorerFactory> factories_;
};

/// `image_id,score` rows.
void write_scores_csv(const std::vector<std::pair<std::string, double>>& scores, const std::filesystem::path& path);

}  // namespace facegen::severity
