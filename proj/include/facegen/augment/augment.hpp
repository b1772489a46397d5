#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <torch/torch.h>

#include "facegen/image.hpp"

namespace facegen::augment {

/// none / c / bg / bgc
enum class Regimen { None, Color, BlitGeometric, All };

Regimen parse_regimen(const std::string& s);
std::string to_string(Regimen r);

struct BlitConfig {
  bool x_flip = true;
  bool rot90 = true;
  bool integer_translate = true;
  double integer_translate_frac = 0.125;
};

// Scale ranges are in log2 units; draws are uniform in [-range, range].
struct GeometricConfig {
  bool isotropic_scale = true;
  bool anisotropic_scale = true;
  bool fractional_translate = true;
  double isotropic_scale_logrange = 0.25;
  double anisotropic_scale_logrange = 0.25;
  double fractional_translate_frac = 0.125;
};

struct ColorConfig {
  bool brightness = true;
  bool contrast = true;
  bool hue = true;
  bool saturation = true;
  bool luma_flip = true;
  double brightness_range = 0.2;
  double contrast_logrange = 0.5;
  double hue_rotation_range = 3.14159265358979323846;  // radians
  double saturation_logrange = 1.0;
};

struct AugmentationConfig {
  Regimen regimen = Regimen::All;
  BlitConfig blit;
  GeometricConfig geometric;
  ColorConfig color;

  bool blit_enabled() const { return regimen == Regimen::BlitGeometric || regimen == Regimen::All; }
  bool geometric_enabled() const { return blit_enabled(); }
  bool color_enabled() const { return regimen == Regimen::Color || regimen == Regimen::All; }

  static AugmentationConfig for_regimen(Regimen r);
};

/// One concrete realization of the random transforms for a single image.
/// Fields left at their neutral value are not applied.
struct AugmentDraw {
  bool x_flip = false;
  int rot90 = 0;  // quarter turns, 0..3
  int shift_x = 0;
  int shift_y = 0;

  bool geometric = false;
  double iso_log2 = 0.0;
  double aniso_log2 = 0.0;
  double translate_x = 0.0;  // fraction of width
  double translate_y = 0.0;

  bool color = false;
  double brightness = 0.0;
  double contrast_log2 = 0.0;
  bool luma_flip = false;
  double hue = 0.0;
  double saturation_log2 = 0.0;

  bool identity() const;
};

/// Draws every gate and parameter in a fixed order regardless of p, so
/// the random stream does not depend on which transforms fire.
AugmentDraw sample_draw(const AugmentationConfig& cfg, double p, int height, int width, std::mt19937_64& rng);

/// Applies a draw to a 1 x C x H x W tensor. Groups run in the order
/// blit -> geometric -> color; the result is clamped to [-1, 1]. Fully
/// differentiable with respect to the input.
torch::Tensor apply_draw(const torch::Tensor& image, const AugmentDraw& draw);

/// 4x4 homogeneous RGB transform of the color group (row-major).
std::array<double, 16> color_matrix(const AugmentDraw& draw);

/// Pure single-image entry point; values in [-1, 1].
Image augment(const Image& image, const AugmentationConfig& cfg, double p, std::uint64_t seed);

/// The single augmentation operator a training loop owns. Every
/// discriminator input, real or generated, passes through the same instance.
class AugmentOperator {
 public:
  explicit AugmentOperator(AugmentationConfig cfg) : cfg_(std::move(cfg)) {}

  /// Augments each image of an N x C x H x W batch with its own seed drawn
  /// from `rng`; image i matches augment(image_i, cfg, p, seed_i).
  torch::Tensor operator()(const torch::Tensor& batch, double p, std::mt19937_64& rng);

  const AugmentationConfig& config() const { return cfg_; }
  std::uint64_t calls() const { return calls_; }
  std::uint64_t images() const { return images_; }

 private:
  AugmentationConfig cfg_;
  std::uint64_t calls_ = 0;
  std::uint64_t images_ = 0;
};

}  // namespace facegen::augment
