#include "facegen/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "facegen/errors.hpp"

namespace facegen {

Image to_signed(const Image& unit) {
  Image out = unit;
  for (auto& v : out.data) v = v * 2.0f - 1.0f;
  return out;
}

Image to_unit(const Image& signed_image) {
  Image out = signed_image;
  for (auto& v : out.data) v = (v + 1.0f) * 0.5f;
  return out;
}

bool all_within(const Image& image, float lo, float hi) {
  return std::all_of(image.data.begin(), image.data.end(),
                     [&](float v) { return std::isfinite(v) && v >= lo && v <= hi; });
}

Image load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image out(rgb.rows, rgb.cols, 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<unsigned char>(y);
    for (int x = 0; x < rgb.cols * 3; ++x) {
      out.data[static_cast<std::size_t>(y) * rgb.cols * 3 + x] = row[x] / 255.0f;
    }
  }
  return out;
}

void save_png(const Image& unit_image, const std::filesystem::path& path) {
  if (unit_image.channels != 3 && unit_image.channels != 1) {
    throw InvalidArgument("save_png expects 1 or 3 channels");
  }
  const int type = unit_image.channels == 3 ? CV_8UC3 : CV_8UC1;
  cv::Mat mat(unit_image.height, unit_image.width, type);
  for (int y = 0; y < unit_image.height; ++y) {
    auto* row = mat.ptr<unsigned char>(y);
    for (int x = 0; x < unit_image.width * unit_image.channels; ++x) {
      const float v = unit_image.data[static_cast<std::size_t>(y) * unit_image.width * unit_image.channels + x];
      row[x] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
  }
  if (unit_image.channels == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write image: " + path.string());
}

float sample_bilinear(const Image& image, double x, double y, int c) {
  // pixel centers sit at integer + 0.5
  const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width - 1));
  const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height - 1));
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  const double top = image.at(y0, x0, c) * (1.0 - ax) + image.at(y0, x1, c) * ax;
  const double bottom = image.at(y1, x0, c) * (1.0 - ax) + image.at(y1, x1, c) * ax;
  return static_cast<float>(top * (1.0 - ay) + bottom * ay);
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

Image blur_pass(const Image& in, const std::vector<double>& k, bool horizontal) {
  const int radius = static_cast<int>(k.size() / 2);
  Image out(in.height, in.width, in.channels);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int c = 0; c < in.channels; ++c) {
        const double center = in.at(y, x, c);
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int sx = horizontal ? std::clamp(x + i, 0, in.width - 1) : x;
          const int sy = horizontal ? y : std::clamp(y + i, 0, in.height - 1);
          acc += k[i + radius] * (in.at(sy, sx, c) - center);
        }
        out.at(y, x, c) = static_cast<float>(center + acc);
      }
    }
  }
  return out;
}

}  // namespace

Image gaussian_blur(const Image& image, double sigma) {
  if (sigma <= 0.0) return image;
  const auto k = gaussian_kernel(sigma);
  return blur_pass(blur_pass(image, k, true), k, false);
}

Image tile_images(const std::vector<Image>& images, int cols) {
  if (images.empty()) return {};
  if (cols <= 0) throw InvalidArgument("tile_images: cols must be positive");
  const auto& first = images.front();
  const int rows = static_cast<int>((images.size() + cols - 1) / cols);
  Image out(rows * first.height, cols * first.width, first.channels);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (!img.same_shape(first)) throw DimensionMismatch("tile_images: mixed image shapes");
    const int oy = static_cast<int>(i / cols) * first.height;
    const int ox = static_cast<int>(i % cols) * first.width;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) out.at(oy + y, ox + x, c) = img.at(y, x, c);
  }
  return out;
}

Image resize_square(const Image& image, int resolution) {
  if (image.height == resolution && image.width == resolution) return image;
  cv::Mat src(image.height, image.width, CV_32FC(image.channels), const_cast<float*>(image.data.data()));
  cv::Mat dst;
  const bool shrinking = resolution < image.height || resolution < image.width;
  cv::resize(src, dst, cv::Size(resolution, resolution), 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  Image out(resolution, resolution, image.channels);
  std::copy_n(dst.ptr<float>(), out.size(), out.data.begin());
  return out;
}

}  // namespace facegen
