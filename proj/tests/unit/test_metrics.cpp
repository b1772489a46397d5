#include <doctest.h>

#include <chrono>
#include <fstream>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "facegen/errors.hpp"
#include "facegen/metrics/dish.hpp"
#include "facegen/metrics/divergence.hpp"
#include "facegen/metrics/embedder.hpp"
#include "facegen/metrics/fid.hpp"
#include "facegen/metrics/ppl.hpp"
#include "facegen/metrics/report.hpp"
#include "temp_dir.hpp"

using namespace facegen;
using namespace facegen::metrics;

namespace {

Eigen::MatrixXd random_spd(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(rng);
  return a * a.transpose() / d + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

FeatureMoments random_moments(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMoments m;
  m.mu = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i) m.mu(i) = n(rng);
  m.sigma = random_spd(d, rng);
  m.n = 100;
  return m;
}

// tr((A B)^{1/2}) from the eigenvalues of the non-symmetric product.
double trace_sqrt_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a * b);
  double t = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) t += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return t;
}

// 0.5 KL(p || m) + 0.5 KL(q || m), m the midpoint.
double js_direct(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) s += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0) s += 0.5 * q[i] * std::log(q[i] / m);
  }
  return s;
}

Image vector_image(std::span<const double> v) {
  Image img(1, 1, static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = static_cast<float>(v[i]);
  return img;
}

class IdentityGenerator : public LatentGenerator {
 public:
  explicit IdentityGenerator(std::size_t d) : d_(d) {}
  std::size_t latent_dim() const override { return d_; }
  Image synthesize(std::span<const double> w, std::uint64_t) const override { return vector_image(w); }

 private:
  std::size_t d_;
};

class ConstantGenerator : public LatentGenerator {
 public:
  std::size_t latent_dim() const override { return 4; }
  Image synthesize(std::span<const double>, std::uint64_t) const override { return Image(4, 4, 3, 0.25f); }
};

// pixel_k = tanh(sum_j A_kj w_j), a smooth nonlinear toy.
class TanhGenerator : public LatentGenerator {
 public:
  TanhGenerator() : a_(12, 6) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n(0.0, 0.6);
    for (int i = 0; i < a_.rows(); ++i)
      for (int j = 0; j < a_.cols(); ++j) a_(i, j) = n(rng);
  }
  std::size_t latent_dim() const override { return 6; }
  Image synthesize(std::span<const double> w, std::uint64_t) const override {
    const Eigen::VectorXd x = a_ * Eigen::Map<const Eigen::VectorXd>(w.data(), 6);
    std::vector<double> px(12);
    for (int i = 0; i < 12; ++i) px[i] = std::tanh(x(i));
    return vector_image(px);
  }

 private:
  Eigen::MatrixXd a_;
};

// E[theta^2] for the angle between two uniform directions on S^{d-1}:
// density proportional to sin^{d-2}(theta) on [0, pi].
double expected_angle_sq(int d) {
  const int n = 20000;
  const double h = std::numbers::pi / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double th = i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double dens = std::pow(std::sin(th), d - 2);
    num += w * th * th * dens;
    den += w * dens;
  }
  return num / den;
}

class MeanScorer : public severity::SeverityScorer {
 public:
  double score(const Image& image) const override {
    double s = 0.0;
    for (float v : image.data) s += v;
    return std::clamp((s / image.size() + 1.0) / 2.0, 0.0, 1.0);
  }
  std::string name() const override { return "mean"; }
  std::string version() const override { return "1"; }
};

std::vector<Image> spread_images(int n) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.emplace_back(4, 4, 3, static_cast<float>(-1.0 + 2.0 * (i + 0.5) / n));
  return out;
}

}  // namespace

TEST_CASE("FID of two Gaussians through the flatten embedder matches the closed form") {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t count = 50000;
  std::vector<Image> a, b;
  a.reserve(count);
  b.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double xa[2] = {n(rng), n(rng)};
    const double xb[2] = {1.0 + std::sqrt(2.0) * n(rng), 1.0 + std::sqrt(2.0) * n(rng)};
    a.push_back(vector_image(xa));
    b.push_back(vector_image(xb));
  }
  const FlattenEmbedder embed(2);
  const double value = fid(compute_moments(embed.embed_all(a)), compute_moments(embed.embed_all(b)));
  const double expected = 2.0 + 2.0 * (3.0 - 2.0 * std::sqrt(2.0));
  CHECK(std::abs(value - expected) / expected < 0.05);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 30.0);
}

TEST_CASE("FID is zero on identical moments and symmetric") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 16);
  for (int i = 0; i < 100; ++i) {
    const int d = dim(rng);
    const auto a = random_moments(d, rng), b = random_moments(d, rng);
    CHECK(fid(a, a) == 0.0);
    CHECK(std::abs(fid(a, b) - fid(b, a)) < 1e-9);
  }
}

TEST_CASE("FID with commuting covariances matches the per-axis formula") {
  FeatureMoments a, b;
  a.mu = Eigen::Vector3d(0.0, 1.0, -2.0);
  b.mu = Eigen::Vector3d(1.0, 1.0, 0.0);
  a.sigma = Eigen::Vector3d(1.0, 4.0, 0.25).asDiagonal();
  b.sigma = Eigen::Vector3d(9.0, 1.0, 1.0).asDiagonal();
  // 1 + 4 + (1 + 9 - 6) + (4 + 1 - 4) + (0.25 + 1 - 1)
  CHECK(fid(a, b) == doctest::Approx(10.25).epsilon(1e-12));
}

TEST_CASE("trace of the product square root matches the eigenvalue oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 64);
  for (int i = 0; i < 100; ++i) {
    const int d = dim(rng);
    const auto s1 = random_spd(d, rng), s2 = random_spd(d, rng);
    const auto got = sqrtm_product(s1, s2);
    const double oracle = trace_sqrt_oracle(s1, s2);
    CHECK(std::abs(got.trace - oracle) / oracle < 1e-8);
    // root squares back to the product
    CHECK(((got.root * got.root) - s1 * s2).norm() / (s1 * s2).norm() < 1e-8);
  }
}

TEST_CASE("sqrtm handles singular covariances and rejects non-finite input") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  s(0, 0) = 1.0;
  const auto r = sqrtm_product(s, Eigen::MatrixXd::Identity(3, 3));
  CHECK(r.trace == doctest::Approx(1.0));
  s(1, 1) = std::nan("");
  CHECK_THROWS_AS(sqrtm_product(s, Eigen::MatrixXd::Identity(3, 3)), InvalidArgument);
}

TEST_CASE("streaming moments agree with the batch estimator") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  Eigen::MatrixXd x(300, 5);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = n(rng) + j;
  MomentAccumulator acc(5);
  for (int i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd row = x.row(i).transpose();
    acc.add({row.data(), 5});
  }
  const auto a = acc.finish(), b = compute_moments(x);
  CHECK((a.mu - b.mu).norm() < 1e-10);
  CHECK((a.sigma - b.sigma).norm() < 1e-10);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  CHECK((b.sigma - centered.transpose() * centered / 299.0).norm() < 1e-10);
  CHECK_THROWS_AS(MomentAccumulator(2).finish(), InvalidArgument);
  CHECK_THROWS_AS(compute_moments(Eigen::MatrixXd(1, 3)), InvalidArgument);
}

TEST_CASE("JS divergence suite") {
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  CHECK(js_divergence(p, p) == 0.0);
  CHECK(std::abs(js_divergence(std::vector<double>{1, 0, 0}, std::vector<double>{0, 0.5, 0.5}) - std::log(2.0)) <= 1e-12);
  CHECK(js_divergence(p, q) == js_divergence(q, p));
  CHECK(std::abs(js_divergence(p, q) - js_direct(p, q)) < 1e-12);
  CHECK(std::abs(js_divergence(p, q) - 0.0338) < 1e-4);

  std::mt19937_64 rng(8);
  std::gamma_distribution<double> g(0.5, 1.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> a(20), b(20);
    double sa = 0, sb = 0;
    for (int k = 0; k < 20; ++k) {
      sa += a[k] = g(rng);
      sb += b[k] = g(rng);
    }
    for (int k = 0; k < 20; ++k) {
      a[k] /= sa;
      b[k] /= sb;
    }
    const double js = js_divergence(a, b);
    CHECK(js >= 0.0);
    CHECK(js <= std::log(2.0));
    CHECK(js == js_divergence(b, a));
    CHECK(std::abs(js - js_direct(a, b)) < 1e-12);
  }
}

TEST_CASE("JS divergence rejects malformed distributions") {
  CHECK_THROWS_AS(js_divergence(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(js_divergence(std::vector<double>{0.6, 0.6}, std::vector<double>{0.5, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(js_divergence(std::vector<double>{1.5, -0.5}, std::vector<double>{0.5, 0.5}), InvalidArgument);
  auto h1 = build_histogram(std::vector<double>{0.1}, 4, 0.0);
  auto h2 = build_histogram(std::vector<double>{0.1}, 4, 0.0);
  h2.bin_edges[2] = 0.51;
  CHECK_THROWS_AS(js_divergence(h1, h2), InvalidArgument);
}

TEST_CASE("histograms share edges, close the last bin and normalize") {
  const auto edges = uniform_edges(4);
  REQUIRE(edges.size() == 5);
  CHECK(edges.front() == 0.0);
  CHECK(edges.back() == 1.0);
  const auto h = build_histogram(std::vector<double>{0.0, 0.25, 0.3, 1.0, 1.5, -2.0}, 4, 0.0);
  CHECK(h.weights == std::vector<double>{2.0 / 6, 2.0 / 6, 0.0, 2.0 / 6});
  CHECK(h.n_samples == 6);
  const auto s = build_histogram(std::vector<double>{0.5}, 4, 1e-6);
  double total = 0.0;
  for (double w : s.weights) {
    CHECK(w > 0.0);
    total += w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("slerp hits the endpoints and stays on the sphere") {
  const std::vector<double> a{1, 0, 0}, b{0, 1, 0};
  CHECK(slerp(a, b, 0.0) == a);
  CHECK(slerp(a, b, 1.0) == b);
  const auto mid = slerp(a, b, 0.5);
  CHECK(mid[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(mid[1] == doctest::Approx(std::sqrt(0.5)));
  const auto near = slerp(a, a, 0.3);
  CHECK(near[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(slerp(std::vector<double>{0, 0, 0}, b, 0.5), InvalidArgument);
  CHECK(lerp(a, b, 0.25) == std::vector<double>{0.75, 0.25, 0.0});
}

TEST_CASE("PPL sanity") {
  const auto start = std::chrono::steady_clock::now();
  const PixelSquaredL2 l2;

  SUBCASE("constant generator gives exactly zero") {
    PPLConfig cfg;
    cfg.n_paths = 200;
    const auto r = ppl(ConstantGenerator{}, l2, cfg, 1);
    CHECK(r.mean == 0.0);
    CHECK(r.std_error == 0.0);
  }

  SUBCASE("identity generator matches the angular integrand") {
    PPLConfig cfg;
    cfg.n_paths = 10000;
    const auto r = ppl(IdentityGenerator{8}, l2, cfg, 7);
    const double oracle = expected_angle_sq(8);
    CHECK(r.n == 10000);
    CHECK(r.std_error > 0.0);
    CHECK(std::abs(r.mean - oracle) <= 2.0 * r.std_error);
  }

  SUBCASE("halving epsilon is stable on a smooth generator") {
    PPLConfig cfg;
    cfg.n_paths = 2000;
    const TanhGenerator g;
    const auto a = ppl(g, l2, cfg, 3);
    cfg.epsilon /= 2.0;
    const auto b = ppl(g, l2, cfg, 3);
    CHECK(a.mean > 0.0);
    CHECK(std::abs(a.mean - b.mean) / a.mean < 0.05);
  }

  SUBCASE("lerp in the mapped space also runs") {
    PPLConfig cfg;
    cfg.n_paths = 100;
    cfg.interpolation = PathSpace::LerpW;
    CHECK(ppl(TanhGenerator{}, l2, cfg, 3).mean > 0.0);
  }
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 120.0);
}

TEST_CASE("PPL is seed deterministic and validates its config") {
  PPLConfig cfg;
  cfg.n_paths = 64;
  const PixelSquaredL2 l2;
  CHECK(ppl(TanhGenerator{}, l2, cfg, 4).mean == ppl(TanhGenerator{}, l2, cfg, 4).mean);
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(ppl(TanhGenerator{}, l2, cfg, 4), InvalidArgument);
  CHECK(parse_path_space("lerp_w") == PathSpace::LerpW);
  CHECK_THROWS_AS(parse_path_space("bogus"), InvalidArgument);
}

TEST_CASE("DISH closure") {
  const auto reals = spread_images(200);
  const MeanScorer scorer;
  DishConfig cfg;
  cfg.n = reals.size();

  SUBCASE("replaying the real set gives zero") {
    const auto r = dish(reals, ReplaySource(reals), scorer, cfg, 1);
    CHECK(std::abs(r.value) <= 1e-9);
    CHECK(r.real.weights == r.fake.weights);
  }

  SUBCASE("a constant generator against a spread set is far") {
    const auto r = dish(reals, ReplaySource({Image(4, 4, 3, 0.1f)}), scorer, cfg, 1);
    CHECK(r.value >= 0.5 * std::log(2.0));
    CHECK(r.value <= std::log(2.0));
    double sr = 0, sf = 0;
    for (double w : r.real.weights) sr += w;
    for (double w : r.fake.weights) sf += w;
    CHECK(sr == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sf == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.real.bin_edges == r.fake.bin_edges);
    CHECK(r.fake_scores.size() == cfg.n);
  }
}

TEST_CASE("DISH excludes images the scorer rejects") {
  class Picky : public MeanScorer {
   public:
    double score(const Image& image) const override {
      if (image.data[0] < -0.9f) throw InvalidArgument("unscorable");
      if (image.data[0] > 0.9f) return std::nan("");
      return MeanScorer::score(image);
    }
  };
  const auto reals = spread_images(100);
  DishConfig cfg;
  cfg.n = 100;
  const auto r = dish(reals, ReplaySource(reals), Picky{}, cfg, 1);
  CHECK(r.real_failures == 10);
  CHECK(r.fake_failures == 10);
  CHECK(r.real_scores.size() == 90);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("perceptual distances are symmetric and zero on identical images") {
  Image a(3, 3, 3, 0.2f), b(3, 3, 3, -0.1f);
  const PixelSquaredL2 l2;
  CHECK(l2.distance(a, a) == 0.0);
  CHECK(l2.distance(a, b) == doctest::Approx(27 * 0.09).epsilon(1e-6));
  const FlattenEmbedder flat(27);
  const EmbeddingSquaredL2 e(flat);
  CHECK(e.distance(a, b) == e.distance(b, a));
  CHECK(e.distance(b, b) == 0.0);
}

TEST_CASE("embedding cache round-trips and keys by content") {
  TempDir dir("emb");
  Eigen::MatrixXd f(3, 2);
  f << 1, 2, 3, 4, 5, 6.5;
  save_embedding_cache(dir.path / "c.bin", 42, f);
  Eigen::MatrixXd back;
  CHECK(load_embedding_cache(dir.path / "c.bin", 42, back));
  CHECK(back == f);
  CHECK_FALSE(load_embedding_cache(dir.path / "c.bin", 43, back));
  CHECK_FALSE(load_embedding_cache(dir.path / "missing.bin", 42, back));
  CHECK(fnv1a64("abc") == fnv1a64("abc"));
  CHECK(fnv1a64("abc") != fnv1a64("abd"));
  CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("metric reports append under a single header") {
  TempDir dir("rep");
  const auto path = dir.path / "m.csv";
  append_metric_rows(path, {{"fid", 1.5, 0.0, 10, 3, "abc"}});
  append_metric_rows(path, {{"ppl", 2.0, 0.1, 20, 3, "abc"}});
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == metric_csv_header());
  CHECK(lines[0] == "metric,value,stderr,n,seed,config_hash");
  CHECK(lines[1].rfind("fid,", 0) == 0);
}
