#include "torch_doctest.hpp"

#include <random>

#include "facegen/augment/ada.hpp"
#include "facegen/augment/augment.hpp"
#include "facegen/errors.hpp"
#include "facegen/tensor_image.hpp"

using namespace facegen;
using namespace facegen::augment;

namespace {

Image noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.9f, 0.9f);
  Image img(h, w, 3);
  for (auto& v : img.data) v = u(rng);
  return img;
}

bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) { return torch::equal(a, b); }

int reflect(int i, int n) {
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

std::array<double, 9> linear_part(const std::array<double, 16>& m) {
  return {m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]};
}

std::array<double, 9> mul3(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return c;
}

}  // namespace

TEST_CASE("p = 0 is a bit-exact identity for every regimen") {
  const auto img = noise_image(16, 16, 1);
  for (auto r : {Regimen::None, Regimen::Color, Regimen::BlitGeometric, Regimen::All}) {
    const auto cfg = AugmentationConfig::for_regimen(r);
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(augment::augment(img, cfg, 0.0, s) == img);
    AugmentOperator op(cfg);
    std::mt19937_64 rng(3);
    const auto batch = to_tensor(std::vector<Image>{img, noise_image(16, 16, 2)});
    CHECK(bit_equal(op(batch, 0.0, rng), batch));
  }
}

TEST_CASE("regimen none never changes an image, even at p = 1") {
  const auto img = noise_image(8, 8, 4);
  for (std::uint64_t s = 0; s < 20; ++s) CHECK(augment::augment(img, AugmentationConfig::for_regimen(Regimen::None), 1.0, s) == img);
}

TEST_CASE("same seed, same output; the draw stream does not depend on p") {
  const auto img = noise_image(16, 16, 5);
  const auto cfg = AugmentationConfig::for_regimen(Regimen::All);
  CHECK(augment::augment(img, cfg, 0.7, 42) == augment::augment(img, cfg, 0.7, 42));
  int differs = 0;
  for (std::uint64_t s = 0; s < 10; ++s) differs += augment::augment(img, cfg, 0.7, s) != augment::augment(img, cfg, 0.7, s + 100);
  CHECK(differs >= 8);

  std::mt19937_64 a(9), b(9);
  sample_draw(cfg, 0.0, 16, 16, a);
  sample_draw(cfg, 1.0, 16, 16, b);
  CHECK(a() == b());
}

TEST_CASE("batched operator matches the single-image entry point") {
  const auto cfg = AugmentationConfig::for_regimen(Regimen::All);
  std::vector<Image> imgs{noise_image(16, 16, 1), noise_image(16, 16, 2), noise_image(16, 16, 3)};
  AugmentOperator op(cfg);
  std::mt19937_64 rng(77), replay(77);
  torch::NoGradGuard guard;
  const auto out = op(to_tensor(imgs), 0.8, rng);
  for (std::size_t i = 0; i < imgs.size(); ++i) CHECK(to_image(out, static_cast<int64_t>(i)) == augment::augment(imgs[i], cfg, 0.8, replay()));
  CHECK(op.calls() == 1);
  CHECK(op.images() == 3);
}

TEST_CASE("double x-flip and four quarter turns are identities") {
  const auto x = to_tensor(noise_image(12, 12, 6));
  AugmentDraw flip;
  flip.x_flip = true;
  CHECK(bit_equal(apply_draw(apply_draw(x, flip), flip), x));
  CHECK_FALSE(bit_equal(apply_draw(x, flip), x));
  AugmentDraw rot;
  rot.rot90 = 1;
  auto y = x;
  for (int i = 0; i < 4; ++i) y = apply_draw(y, rot);
  CHECK(bit_equal(y, x));
}

TEST_CASE("x-flip and quarter turn match direct index oracles") {
  const auto img = noise_image(6, 6, 7);
  AugmentDraw flip;
  flip.x_flip = true;
  const auto f = to_image(apply_draw(to_tensor(img), flip));
  AugmentDraw rot;
  rot.rot90 = 1;
  const auto r = to_image(apply_draw(to_tensor(img), rot));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c) {
        CHECK(f.at(y, x, c) == img.at(y, 5 - x, c));
        // counter-clockwise in (row, col): out[y][x] = in[x][W-1-y]
        CHECK(r.at(y, x, c) == img.at(x, 5 - y, c));
      }
}

TEST_CASE("integer translation shifts content with reflected borders") {
  const auto img = noise_image(8, 10, 8);
  AugmentDraw d;
  d.shift_x = 3;
  d.shift_y = -2;
  const auto out = to_image(apply_draw(to_tensor(img), d));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == img.at(reflect(y + 2, 8), reflect(x - 3, 10), c));
}

TEST_CASE("neutral geometric parameters reproduce the input") {
  const auto x = to_tensor(noise_image(16, 16, 9));
  AugmentDraw d;
  d.geometric = true;
  CHECK(torch::allclose(apply_draw(x, d), x, 0.0, 1e-5));
  d.iso_log2 = 1.0;  // zoom in 2x: the center stays put
  const auto z = to_image(apply_draw(x, d));
  const auto src = to_image(x);
  const double center = 0.25 * (src.at(7, 7, 0) + src.at(7, 8, 0) + src.at(8, 7, 0) + src.at(8, 8, 0));
  const double zc = 0.25 * (z.at(7, 7, 0) + z.at(7, 8, 0) + z.at(8, 7, 0) + z.at(8, 8, 0));
  CHECK(zc == doctest::Approx(center).epsilon(0.05));
}

TEST_CASE("color matrices: luma flip is an involution, hue keeps the gray axis") {
  AugmentDraw d;
  d.luma_flip = true;
  const auto l = linear_part(color_matrix(d));
  const auto ll = mul3(l, l);
  for (int i = 0; i < 9; ++i) CHECK(ll[i] == doctest::Approx(i % 4 == 0 ? 1.0 : 0.0).epsilon(1e-12));

  AugmentDraw h;
  h.hue = 1.1;
  const auto m = color_matrix(h);
  for (int i = 0; i < 3; ++i) CHECK(m[i * 4] + m[i * 4 + 1] + m[i * 4 + 2] == doctest::Approx(1.0).epsilon(1e-12));
  const auto hm = linear_part(m);
  std::array<double, 9> ht{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) ht[i * 3 + j] = hm[j * 3 + i];
  const auto orth = mul3(hm, ht);
  for (int i = 0; i < 9; ++i) CHECK(orth[i] == doctest::Approx(i % 4 == 0 ? 1.0 : 0.0).epsilon(1e-12));

  AugmentDraw b;
  b.brightness = 0.1;
  b.contrast_log2 = 1.0;
  const auto bm = color_matrix(b);
  // contrast applied after brightness: 2 (x + 0.1)
  CHECK(bm[0] == doctest::Approx(2.0));
  CHECK(bm[3] == doctest::Approx(0.2));
  CHECK(bm[15] == 1.0);

  AugmentDraw s;
  s.saturation_log2 = -30.0;  // collapse to gray
  const auto sm = color_matrix(s);
  CHECK(sm[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(sm[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("color transform applied to pixels follows the matrix and clamps") {
  Image img(2, 2, 3, 0.0f);
  img.at(0, 0, 0) = 0.5f;
  img.at(1, 1, 2) = -0.5f;
  AugmentDraw d;
  d.color = true;
  d.brightness = 0.2;
  d.contrast_log2 = 2.0;  // x4
  const auto out = to_image(apply_draw(to_tensor(img), d));
  CHECK(out.at(0, 0, 0) == 1.0f);
  CHECK(out.at(0, 1, 0) == doctest::Approx(0.8));
  CHECK(out.at(1, 1, 2) == doctest::Approx(-1.0));
}

TEST_CASE("apply_draw is differentiable with respect to the input") {
  AugmentDraw d;
  d.x_flip = true;
  d.shift_x = 1;
  d.geometric = true;
  d.iso_log2 = 0.2;
  d.color = true;
  d.hue = 0.4;
  const auto x = (torch::rand({1, 3, 8, 8}) * 0.5 - 0.25).set_requires_grad(true);
  apply_draw(x, d).sum().backward();
  REQUIRE(x.grad().defined());
  CHECK(x.grad().abs().sum().item<double>() > 0.0);
}

TEST_CASE("regimens gate the transform groups") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto c = sample_draw(AugmentationConfig::for_regimen(Regimen::Color), 1.0, 16, 16, rng);
    CHECK_FALSE(c.x_flip);
    CHECK(c.rot90 == 0);
    CHECK_FALSE(c.geometric);
    CHECK(c.color);
    const auto bg = sample_draw(AugmentationConfig::for_regimen(Regimen::BlitGeometric), 1.0, 16, 16, rng);
    CHECK(bg.x_flip);
    CHECK(bg.rot90 >= 1);
    CHECK(bg.rot90 <= 3);
    CHECK(std::abs(bg.shift_x) <= 2);
    CHECK(bg.geometric);
    CHECK_FALSE(bg.color);
  }
  CHECK(parse_regimen("bgc") == Regimen::All);
  CHECK(to_string(parse_regimen("bg")) == "bg");
  CHECK_THROWS_AS(parse_regimen("xyz"), InvalidArgument);
}

TEST_CASE("ADA controller: a pinned overfitting signal drives p to 1 within 20k images") {
  AdaState s;
  s.rt_estimate = 1.0;
  const std::vector<float> positive(10, 3.0f);
  double prev = s.p;
  for (int images = 0; images < 20000; images += 10) {
    s = ada_update(s, positive);
    CHECK(s.p >= prev);
    prev = s.p;
  }
  CHECK(s.p == 1.0);
  s = ada_update(s, positive);
  CHECK(s.p == 1.0);
}

TEST_CASE("ADA controller: a pinned underfitting signal drives p to 0 within 20k images") {
  AdaState s;
  s.p = 1.0;
  s.rt_estimate = -1.0;
  const std::vector<float> negative(16, -2.0f);
  double prev = s.p;
  int images = 0;
  for (; images < 20000; images += 16) {
    s = ada_update(s, negative);
    CHECK(s.p <= prev);
    prev = s.p;
  }
  CHECK(s.p == 0.0);
}

TEST_CASE("ADA controller: estimate tracks the sign mean and rejects empty batches") {
  AdaState s;
  s.ema_images = 10.0;
  s = ada_update(s, std::vector<float>{1.0f, -1.0f, 2.0f, 0.0f, 5.0f, 5.0f, 5.0f, 5.0f, 5.0f, -5.0f});
  CHECK(s.rt_estimate == doctest::Approx(0.5));
  CHECK(s.p == 0.0);  // below target: stays at the lower bound
  CHECK_THROWS_AS(ada_update(s, std::vector<float>{}), InvalidArgument);
}
