#include "facegen/metrics/embedder.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "facegen/errors.hpp"

namespace facegen::metrics {

Eigen::MatrixXd Embedder::embed_all(std::span<const Image> images) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto row = embed(images[i]);
    if (row.size() != dim()) throw DimensionMismatch("embedder returned wrong dimension");
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
  }
  return out;
}

std::vector<double> FlattenEmbedder::embed(const Image& image) const {
  if (image.size() != dim_) throw DimensionMismatch("flatten embedder: image has " + std::to_string(image.size()) + " values");
  return {image.data.begin(), image.data.end()};
}

double PixelSquaredL2::distance(const Image& a, const Image& b) const {
  if (!a.same_shape(b)) throw DimensionMismatch("distance between differently shaped images");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc;
}

double EmbeddingSquaredL2::distance(const Image& a, const Image& b) const {
  const auto fa = embedder_.embed(a);
  const auto fb = embedder_.embed(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) acc += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  return acc;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace {
constexpr std::array<char, 8> kCacheMagic = {'F', 'G', 'E', 'M', 'B', 'D', '0', '1'};
}

void save_embedding_cache(const std::filesystem::path& path, std::uint64_t key, const Eigen::MatrixXd& features) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding cache " + path.string());
  const std::uint64_t d = static_cast<std::uint64_t>(features.cols());
  const std::uint64_t n = static_cast<std::uint64_t>(features.rows());
  out.write(kCacheMagic.data(), kCacheMagic.size());
  out.write(reinterpret_cast<const char*>(&key), sizeof key);
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = features;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
}

bool load_embedding_cache(const std::filesystem::path& path, std::uint64_t key, Eigen::MatrixXd& features) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::array<char, 8> magic{};
  std::uint64_t stored = 0, d = 0, n = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&stored), sizeof stored);
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || magic != kCacheMagic || stored != key) return false;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!in) return false;
  features = rm;
  return true;
}

}  // namespace facegen::metrics
