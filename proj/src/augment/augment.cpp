#include "facegen/augment/augment.hpp"

#include <cmath>

#include "facegen/errors.hpp"
#include "facegen/tensor_image.hpp"

namespace facegen::augment {

Regimen parse_regimen(const std::string& s) {
  if (s == "none") return Regimen::None;
  if (s == "c") return Regimen::Color;
  if (s == "bg") return Regimen::BlitGeometric;
  if (s == "bgc") return Regimen::All;
  throw InvalidArgument("unknown augmentation regimen: " + s);
}

std::string to_string(Regimen r) {
  switch (r) {
    case Regimen::None: return "none";
    case Regimen::Color: return "c";
    case Regimen::BlitGeometric: return "bg";
    case Regimen::All: return "bgc";
  }
  return "none";
}

AugmentationConfig AugmentationConfig::for_regimen(Regimen r) {
  AugmentationConfig cfg;
  cfg.regimen = r;
  return cfg;
}

bool AugmentDraw::identity() const { return !x_flip && rot90 == 0 && shift_x == 0 && shift_y == 0 && !geometric && !color; }

AugmentDraw sample_draw(const AugmentationConfig& cfg, double p, int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  auto gate = [&](bool enabled) { return u01(rng) < p && enabled; };

  AugmentDraw d;
  const bool blit = cfg.blit_enabled();
  const bool geom = cfg.geometric_enabled();
  const bool color = cfg.color_enabled();

  d.x_flip = gate(blit && cfg.blit.x_flip);
  {
    const bool on = gate(blit && cfg.blit.rot90);
    const int k = 1 + static_cast<int>(u01(rng) * 3.0) % 3;
    d.rot90 = on ? k : 0;
  }
  {
    const bool on = gate(blit && cfg.blit.integer_translate);
    const double ux = sym(rng), uy = sym(rng);
    if (on) {
      d.shift_x = static_cast<int>(std::lround(ux * cfg.blit.integer_translate_frac * width));
      d.shift_y = static_cast<int>(std::lround(uy * cfg.blit.integer_translate_frac * height));
    }
  }
  {
    const bool on = gate(geom && cfg.geometric.isotropic_scale);
    const double u = sym(rng);
    if (on) d.iso_log2 = u * cfg.geometric.isotropic_scale_logrange;
    d.geometric |= on;
  }
  {
    const bool on = gate(geom && cfg.geometric.anisotropic_scale);
    const double u = sym(rng);
    if (on) d.aniso_log2 = u * cfg.geometric.anisotropic_scale_logrange;
    d.geometric |= on;
  }
  {
    const bool on = gate(geom && cfg.geometric.fractional_translate);
    const double ux = sym(rng), uy = sym(rng);
    if (on) {
      d.translate_x = ux * cfg.geometric.fractional_translate_frac;
      d.translate_y = uy * cfg.geometric.fractional_translate_frac;
    }
    d.geometric |= on;
  }
  {
    const bool on = gate(color && cfg.color.brightness);
    const double u = sym(rng);
    if (on) d.brightness = u * cfg.color.brightness_range;
    d.color |= on;
  }
  {
    const bool on = gate(color && cfg.color.contrast);
    const double u = sym(rng);
    if (on) d.contrast_log2 = u * cfg.color.contrast_logrange;
    d.color |= on;
  }
  {
    d.luma_flip = gate(color && cfg.color.luma_flip);
    d.color |= d.luma_flip;
  }
  {
    const bool on = gate(color && cfg.color.hue);
    const double u = sym(rng);
    if (on) d.hue = u * cfg.color.hue_rotation_range;
    d.color |= on;
  }
  {
    const bool on = gate(color && cfg.color.saturation);
    const double u = sym(rng);
    if (on) d.saturation_log2 = u * cfg.color.saturation_logrange;
    d.color |= on;
  }
  return d;
}

namespace {

using Mat4 = std::array<double, 16>;

Mat4 identity4() { return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}; }

Mat4 mul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i * 4 + j] += a[i * 4 + k] * b[k * 4 + j];
  return c;
}

// 3x3 block embedded in a homogeneous 4x4
Mat4 linear3(const std::array<double, 9>& m) {
  Mat4 out = identity4();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i * 4 + j] = m[i * 3 + j];
  return out;
}

// reflect an index into [0, n)
int64_t reflect(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

torch::Tensor shift_reflect(const torch::Tensor& x, int64_t dim, int shift) {
  if (shift == 0) return x;
  const int64_t n = x.size(dim);
  std::vector<int64_t> idx(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = reflect(i - shift, n);
  return x.index_select(dim, torch::tensor(idx, torch::kLong));
}

}  // namespace

std::array<double, 16> color_matrix(const AugmentDraw& d) {
  const double s3 = 1.0 / std::sqrt(3.0);
  const std::array<double, 3> v{s3, s3, s3};
  std::array<double, 9> vvt{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) vvt[i * 3 + j] = v[i] * v[j];

  Mat4 c = identity4();
  if (d.brightness != 0.0) {
    Mat4 t = identity4();
    t[3] = t[7] = t[11] = d.brightness;
    c = mul(t, c);
  }
  if (d.contrast_log2 != 0.0) {
    const double s = std::exp2(d.contrast_log2);
    c = mul(linear3({s, 0, 0, 0, s, 0, 0, 0, s}), c);
  }
  if (d.luma_flip) {
    std::array<double, 9> m{};
    for (int i = 0; i < 9; ++i) m[i] = (i % 4 == 0 ? 1.0 : 0.0) - 2.0 * vvt[i];
    c = mul(linear3(m), c);
  }
  if (d.hue != 0.0) {
    // Rodrigues rotation about the luma axis
    const double co = std::cos(d.hue), si = std::sin(d.hue);
    const std::array<double, 9> cross{0, -v[2], v[1], v[2], 0, -v[0], -v[1], v[0], 0};
    std::array<double, 9> m{};
    for (int i = 0; i < 9; ++i) m[i] = (i % 4 == 0 ? co : 0.0) + si * cross[i] + (1.0 - co) * vvt[i];
    c = mul(linear3(m), c);
  }
  if (d.saturation_log2 != 0.0) {
    const double s = std::exp2(d.saturation_log2);
    std::array<double, 9> m{};
    for (int i = 0; i < 9; ++i) m[i] = vvt[i] + s * ((i % 4 == 0 ? 1.0 : 0.0) - vvt[i]);
    c = mul(linear3(m), c);
  }
  return c;
}

torch::Tensor apply_draw(const torch::Tensor& image, const AugmentDraw& d) {
  if (d.identity()) return image;
  torch::Tensor x = image;
  if (d.x_flip) x = torch::flip(x, {3});
  if (d.rot90 != 0) x = torch::rot90(x, d.rot90, {2, 3});
  x = shift_reflect(x, 3, d.shift_x);
  x = shift_reflect(x, 2, d.shift_y);

  if (d.geometric) {
    const double sx = std::exp2(d.iso_log2 + d.aniso_log2);
    const double sy = std::exp2(d.iso_log2 - d.aniso_log2);
    // output -> input sampling map in normalized [-1, 1] coordinates
    const auto theta = torch::tensor({1.0 / sx, 0.0, -2.0 * d.translate_x / sx, 0.0, 1.0 / sy, -2.0 * d.translate_y / sy},
                                     x.options().requires_grad(false))
                           .view({1, 2, 3});
    const auto grid = torch::nn::functional::affine_grid(theta, x.sizes(), /*align_corners=*/false);
    x = torch::nn::functional::grid_sample(x, grid,
                                           torch::nn::functional::GridSampleFuncOptions()
                                               .mode(torch::kBilinear)
                                               .padding_mode(torch::kReflection)
                                               .align_corners(false));
  }

  if (d.color) {
    const auto m = color_matrix(d);
    const auto mt = torch::tensor(std::vector<double>(m.begin(), m.end()), x.options().requires_grad(false)).view({4, 4});
    const auto lin = mt.index({torch::indexing::Slice(0, 3), torch::indexing::Slice(0, 3)});
    const auto off = mt.index({torch::indexing::Slice(0, 3), 3}).view({1, 3, 1, 1});
    const auto n = x.size(0), h = x.size(2), w = x.size(3);
    x = torch::matmul(lin, x.reshape({n, 3, h * w})).reshape({n, 3, h, w}) + off;
  }
  return x.clamp(-1.0, 1.0);
}

Image augment(const Image& image, const AugmentationConfig& cfg, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const AugmentDraw d = sample_draw(cfg, p, image.height, image.width, rng);
  if (d.identity()) return image;
  torch::NoGradGuard no_grad;
  return to_image(apply_draw(to_tensor(image), d));
}

torch::Tensor AugmentOperator::operator()(const torch::Tensor& batch, double p, std::mt19937_64& rng) {
  ++calls_;
  images_ += static_cast<std::uint64_t>(batch.size(0));
  const int h = static_cast<int>(batch.size(2));
  const int w = static_cast<int>(batch.size(3));
  std::vector<torch::Tensor> parts;
  parts.reserve(static_cast<std::size_t>(batch.size(0)));
  bool any = false;
  for (int64_t i = 0; i < batch.size(0); ++i) {
    std::mt19937_64 local(rng());
    const AugmentDraw d = sample_draw(cfg_, p, h, w, local);
    any |= !d.identity();
    parts.push_back(apply_draw(batch.narrow(0, i, 1), d));
  }
  return any ? torch::cat(parts, 0) : batch;
}

}  // namespace facegen::augment
