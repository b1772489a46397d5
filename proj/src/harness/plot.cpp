#include "facegen/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "facegen/errors.hpp"
#include "facegen/gan/generate.hpp"

namespace facegen::harness {

namespace fs = std::filesystem;

namespace {

constexpr int kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing " + path.filename().string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  cv::Mat canvas{kH, kW, CV_8UC3, cv::Scalar(255, 255, 255)};
  double x0, x1, y0, y1;

  cv::Point at(double x, double y) const {
    const double fx = (x - x0) / (x1 - x0), fy = (y - y0) / (y1 - y0);
    return {kLeft + static_cast<int>(std::lround(fx * (kW - kLeft - kRight))),
            kH - kBottom - static_cast<int>(std::lround(fy * (kH - kTop - kBottom)))};
  }
};

Frame make_frame(double x0, double x1, double y0, double y1, const std::string& title, const std::string& xl,
                 const std::string& yl) {
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  Frame f{cv::Mat(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255)), x0, x1, y0, y1};
  const cv::Scalar ink(40, 40, 40);
  cv::line(f.canvas, f.at(x0, y0), f.at(x1, y0), ink, 1);
  cv::line(f.canvas, f.at(x0, y0), f.at(x0, y1), ink, 1);
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    const auto px = f.at(xv, y0), py = f.at(x0, yv);
    cv::line(f.canvas, px, px + cv::Point(0, 4), ink, 1);
    cv::putText(f.canvas, fmt(xv), px + cv::Point(-12, 20), cv::FONT_HERSHEY_SIMPLEX, 0.4, ink, 1, cv::LINE_AA);
    cv::line(f.canvas, py, py - cv::Point(4, 0), ink, 1);
    cv::putText(f.canvas, fmt(yv), py + cv::Point(-60, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, ink, 1, cv::LINE_AA);
  }
  cv::putText(f.canvas, title, {kLeft, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.5, ink, 1, cv::LINE_AA);
  cv::putText(f.canvas, xl, {kW / 2 - 20, kH - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45, ink, 1, cv::LINE_AA);
  cv::putText(f.canvas, yl, {5, kTop - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.45, ink, 1, cv::LINE_AA);
  return f;
}

void write_png(const cv::Mat& m, const fs::path& path) {
  fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write " + path.string());
}

std::string cell_title(const fs::path& cell) {
  std::ifstream in(cell / "result.json");
  if (!in) return cell.filename().string();
  const auto j = nlohmann::json::parse(in);
  std::string t = "n=" + std::to_string(j.value("sample_size", 0)) + " " + j.value("regimen", std::string()) +
                  (j.value("transfer", false) ? " transfer" : " scratch") + " seed " +
                  std::to_string(j.value("seed", 0ULL));
  const auto v = j.value("variant", std::string());
  return v.empty() ? t : t + " [" + v + "]";
}

}  // namespace

std::size_t draw_curve(const Series& s, const std::string& title, const std::string& x_label, const std::string& y_label,
                       const fs::path& path) {
  if (s.x.size() != s.y.size() || s.x.empty()) throw InvalidArgument("curve needs matching, nonempty series");
  const double xmax = *std::max_element(s.x.begin(), s.x.end());
  const auto [ymin, ymax] = std::minmax_element(s.y.begin(), s.y.end());
  const Frame f = make_frame(0.0, xmax, std::min(0.0, *ymin), *ymax * 1.1, title, x_label, y_label);
  const cv::Scalar line(180, 90, 30);
  for (std::size_t i = 1; i < s.x.size(); ++i) cv::line(f.canvas, f.at(s.x[i - 1], s.y[i - 1]), f.at(s.x[i], s.y[i]), line, 2, cv::LINE_AA);
  for (std::size_t i = 0; i < s.x.size(); ++i) cv::circle(f.canvas, f.at(s.x[i], s.y[i]), 4, line, cv::FILLED, cv::LINE_AA);
  write_png(f.canvas, path);
  return s.x.size();
}

void draw_histograms(const std::vector<double>& edges, const std::vector<double>& real,
                     const std::vector<double>& generated, const std::string& title, const fs::path& path) {
  if (edges.size() != real.size() + 1 || real.size() != generated.size() || real.empty()) {
    throw InvalidArgument("histograms need bins + 1 shared edges");
  }
  const double top = std::max(*std::max_element(real.begin(), real.end()), *std::max_element(generated.begin(), generated.end()));
  const Frame f = make_frame(edges.front(), edges.back(), 0.0, top * 1.1, title, "severity index", "fraction");
  cv::Mat overlay = f.canvas.clone();
  for (std::size_t b = 0; b < real.size(); ++b) {
    cv::rectangle(overlay, f.at(edges[b], 0.0), f.at(edges[b + 1], real[b]), cv::Scalar(200, 120, 40), cv::FILLED);
  }
  cv::addWeighted(overlay, 0.55, f.canvas, 0.45, 0.0, f.canvas);
  overlay = f.canvas.clone();
  for (std::size_t b = 0; b < generated.size(); ++b) {
    cv::rectangle(overlay, f.at(edges[b], 0.0), f.at(edges[b + 1], generated[b]), cv::Scalar(40, 140, 240), cv::FILLED);
  }
  cv::addWeighted(overlay, 0.55, f.canvas, 0.45, 0.0, f.canvas);
  cv::putText(f.canvas, "real", {kW - 110, kTop + 10}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(200, 120, 40), 1, cv::LINE_AA);
  cv::putText(f.canvas, "generated", {kW - 110, kTop + 28}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(40, 140, 240), 1, cv::LINE_AA);
  write_png(f.canvas, path);
}

PlotSummary plot_outputs(const fs::path& run_dir, int grid_side, unsigned long long seed) {
  PlotSummary out;
  const auto cells_dir = run_dir / "cells";
  if (!fs::is_directory(cells_dir)) return out;
  std::vector<fs::path> cells;
  for (const auto& e : fs::directory_iterator(cells_dir)) {
    if (e.is_directory()) cells.push_back(e.path());
  }
  std::sort(cells.begin(), cells.end());
  const auto plots = run_dir / "plots";
  for (const auto& cell : cells) {
    const auto id = cell.filename().string();
    const auto title = cell_title(cell);
    try {
      Series s;
      for (const auto& row : read_csv(cell / "training_log.csv")) {
        s.x.push_back(std::stod(row.at(1)));
        s.y.push_back(std::stod(row.at(6)));
      }
      if (s.x.empty()) throw InvalidArgument("no evaluation points");
      const auto file = plots / ("fid_" + id + ".png");
      out.plots.push_back({file, "fid_curve", draw_curve(s, "FID " + title, "kimg", "FID", file)});
    } catch (const std::exception& e) {
      out.skipped.push_back(id + ": fid_curve: " + e.what());
    }
    try {
      std::vector<double> edges, real, gen;
      for (const auto& row : read_csv(cell / "severity_histogram.csv")) {
        if (edges.empty()) edges.push_back(std::stod(row.at(0)));
        edges.push_back(std::stod(row.at(1)));
        real.push_back(std::stod(row.at(2)));
        gen.push_back(std::stod(row.at(3)));
      }
      const auto file = plots / ("severity_" + id + ".png");
      draw_histograms(edges, real, gen, "severity " + title, file);
      out.plots.push_back({file, "severity_histogram", real.size()});
    } catch (const std::exception& e) {
      out.skipped.push_back(id + ": severity_histogram: " + e.what());
    }
    try {
      if (!fs::exists(cell / "best.ckpt")) throw IoError("missing best.ckpt");
      auto g = gan::build_generator(gan::load_checkpoint(cell / "best.ckpt"));
      const auto n = static_cast<std::size_t>(grid_side) * static_cast<std::size_t>(grid_side);
      auto batch = gan::generate_batch(g, n, seed);
      std::vector<Image> tiles;
      for (auto& im : batch.images) tiles.push_back(resize_square(to_unit(im), 64));
      const auto file = plots / ("samples_" + id + ".png");
      fs::create_directories(plots);
      save_png(tile_images(tiles, grid_side), file);
      out.plots.push_back({file, "samples", n});
    } catch (const std::exception& e) {
      out.skipped.push_back(id + ": samples: " + e.what());
    }
  }
  return out;
}

}  // namespace facegen::harness
