#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "facegen/errors.hpp"
#include "facegen/severity/scorer.hpp"

namespace facegen::severity {

PatchMetric parse_patch_metric(const std::string& s) {
  if (s == "L2" || s == "l2") return PatchMetric::L2;
  if (s == "gradient_L2" || s == "gradient_l2") return PatchMetric::GradientL2;
  throw InvalidArgument("unknown patch metric: " + s);
}

std::string to_string(PatchMetric m) { return m == PatchMetric::L2 ? "L2" : "gradient_L2"; }

void AsymmetryProxyConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(roi_x0) || !unit(roi_x1) || !unit(roi_y0) || !unit(roi_y1) || roi_x0 >= roi_x1 || roi_y0 >= roi_y1) {
    throw InvalidArgument("severity roi must be a nonempty rectangle inside [0,1]^2");
  }
  if (!(mirror_axis > 0.0 && mirror_axis < 1.0)) throw InvalidArgument("mirror axis must be inside the image");
  if (!(lo < hi)) throw InvalidArgument("calibration requires lo < hi");
}

namespace {

struct Roi {
  int x0, x1, y0, y1;  // half-open
  int axis2;           // mirrored column of x is axis2 - 1 - x
};

Roi roi_pixels(const Image& image, const AsymmetryProxyConfig& cfg) {
  Roi r;
  r.axis2 = static_cast<int>(std::lround(2.0 * cfg.mirror_axis * image.width));
  r.x0 = static_cast<int>(std::lround(cfg.roi_x0 * image.width));
  r.x1 = static_cast<int>(std::lround(cfg.roi_x1 * image.width));
  r.y0 = static_cast<int>(std::lround(cfg.roi_y0 * image.height));
  r.y1 = std::max(r.y0 + 1, static_cast<int>(std::lround(cfg.roi_y1 * image.height)));
  // restrict to columns whose mirror partner stays inside the frame
  r.x0 = std::max({r.x0, 0, r.axis2 - image.width});
  r.x1 = std::min({r.x1, image.width, r.axis2});
  return r;
}

// value, or its gradient along one axis, at (y, x) of the mirrored/unmirrored image
double sample(const Image& im, int y, int x, int c, bool mirrored, int axis2) {
  return im.at(y, mirrored ? axis2 - 1 - x : x, c);
}

}  // namespace

double raw_asymmetry(const Image& image, const AsymmetryProxyConfig& cfg) {
  const Roi r = roi_pixels(image, cfg);
  if (r.x1 <= r.x0 || r.y1 <= r.y0 || r.y1 > image.height) return 0.0;
  double acc = 0.0;
  std::size_t count = 0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        if (cfg.patch_metric == PatchMetric::L2) {
          const double d = sample(image, y, x, c, false, r.axis2) - sample(image, y, x, c, true, r.axis2);
          acc += d * d;
        } else {
          // forward differences, replicated at the far border; the mirrored
          // image's horizontal gradient is taken in mirrored coordinates
          const int xn = x + 1 < r.x1 ? x + 1 : x;
          const int yn = y + 1 < r.y1 ? y + 1 : y;
          const double gx = sample(image, y, xn, c, false, r.axis2) - sample(image, y, x, c, false, r.axis2);
          const double gxm = sample(image, y, xn, c, true, r.axis2) - sample(image, y, x, c, true, r.axis2);
          const double gy = sample(image, yn, x, c, false, r.axis2) - sample(image, y, x, c, false, r.axis2);
          const double gym = sample(image, yn, x, c, true, r.axis2) - sample(image, y, x, c, true, r.axis2);
          acc += (gx - gxm) * (gx - gxm) + (gy - gym) * (gy - gym);
        }
        ++count;
      }
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

double proxy_score(const Image& image, const AsymmetryProxyConfig& cfg) {
  const double raw = raw_asymmetry(image, cfg);
  return std::clamp((raw - cfg.lo) / (cfg.hi - cfg.lo), 0.0, 1.0);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AsymmetryProxyConfig calibrate(const AsymmetryProxyConfig& cfg, std::span<const Image> reference) {
  if (reference.size() < 50) throw InvalidArgument("calibration needs at least 50 reference images");
  std::vector<double> raw;
  raw.reserve(reference.size());
  for (const auto& im : reference) raw.push_back(raw_asymmetry(im, cfg));
  const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
  if (*mn == *mx) throw DegenerateSet("all reference images have the same raw asymmetry");
  AsymmetryProxyConfig out = cfg;
  out.lo = percentile(raw, 1.0);
  out.hi = percentile(raw, 99.0);
  if (!(out.lo < out.hi)) throw DegenerateSet("1st and 99th percentile of raw asymmetry coincide");
  return out;
}

ScorerRegistry::ScorerRegistry() {
  add("asymmetry_proxy", [](const ScorerOptions& o) {
    AsymmetryProxyConfig cfg;
    auto num = [&](const char* key, double& field) {
      if (auto it = o.find(key); it != o.end()) field = std::stod(it->second);
    };
    num("roi_x0", cfg.roi_x0);
    num("roi_y0", cfg.roi_y0);
    num("roi_x1", cfg.roi_x1);
    num("roi_y1", cfg.roi_y1);
    num("mirror_axis", cfg.mirror_axis);
    num("lo", cfg.lo);
    num("hi", cfg.hi);
    if (auto it = o.find("patch_metric"); it != o.end()) cfg.patch_metric = parse_patch_metric(it->second);
    return std::make_unique<AsymmetryProxyScorer>(cfg);
  });
}

ScorerRegistry& ScorerRegistry::instance() {
  static ScorerRegistry registry;
  return registry;
}

void ScorerRegistry::add(const std::string& name, ScorerFactory factory) { factories_[name] = std::move(factory); }

std::unique_ptr<SeverityScorer> ScorerRegistry::create(const std::string& name, const ScorerOptions& options) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) throw InvalidArgument("unknown severity scorer: " + name);
  return it->second(options);
}

std::vector<std::string> ScorerRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : factories_) out.push_back(k);
  return out;
}

void write_scores_csv(const std::vector<std::pair<std::string, double>>& scores, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "image_id,score\n" << std::setprecision(17);
  for (const auto& [id, s] : scores) out << id << ',' << s << '\n';
}

}  // namespace facegen::severity
