#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace facegen {

/// Dense H x W x C image, channel-last, float storage.
///
/// The library uses two value conventions: raw photographs and files on disk
/// are in [0, 1]; everything that flows through augmentation, the networks
/// and the metrics is in [-1, 1]. `to_signed` / `to_unit` convert.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int y, int x, int c) { return data[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data[index(y, x, c)]; }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// [0,1] <-> [-1,1]
Image to_signed(const Image& unit);
Image to_unit(const Image& signed_image);

bool all_within(const Image& image, float lo, float hi);

/// Reads any format OpenCV understands as 8-bit RGB, values in [0, 1].
Image load_image(const std::filesystem::path& path);

/// Writes an image with values in [0, 1] as 8-bit RGB PNG (values are clamped).
void save_png(const Image& unit_image, const std::filesystem::path& path);

/// Bilinear sample at continuous pixel-center coordinates, replicating edges
/// outside the frame.
float sample_bilinear(const Image& image, double x, double y, int c);

/// Separable Gaussian blur with edge replication.
///
/// Written as x + sum_k w_k (x_{i+k} - x_i), which is exact on constant
/// regions. sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& image, double sigma);

/// Tiles equally sized images into a rows x cols grid.
Image tile_images(const std::vector<Image>& images, int cols);

/// Area-average downscale (or bilinear upscale) to a square resolution.
Image resize_square(const Image& image, int resolution);

}  // namespace facegen
