#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace facegen::harness {

struct PlotRecord {
  std::filesystem::path file;
  std::string kind;  // fid_curve, severity_histogram, samples
  std::size_t elements = 0;  // markers, bins or tiles drawn
};

struct PlotSummary {
  std::vector<PlotRecord> plots;
  std::vector<std::string> skipped;  // "<cell>: <plot kind>: <reason>"
};

/// Scans `run_dir/cells/*` and writes into `run_dir/plots`:
///   fid_<cell>.png        FID against kimg, one marker per evaluation point
///   severity_<cell>.png   real and generated severity histograms overlaid
///   samples_<cell>.png    grid_side x grid_side samples from best.ckpt
/// Missing inputs skip the affected plot only.
PlotSummary plot_outputs(const std::filesystem::path& run_dir, int grid_side = 5, unsigned long long seed = 0);

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

/// Line plot with circular markers; returns the number of markers drawn.
std::size_t draw_curve(const Series& s, const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::filesystem::path& path);

/// Overlaid histograms sharing `edges`.
void draw_histograms(const std::vector<double>& edges, const std::vector<double>& real,
                     const std::vector<double>& generated, const std::string& title, const std::filesystem::path& path);

}  // namespace facegen::harness
