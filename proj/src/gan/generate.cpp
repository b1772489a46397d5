#include "facegen/gan/generate.hpp"

#include <cstdio>
#include <fstream>

#include "facegen/errors.hpp"
#include "facegen/gan/trainer.hpp"
#include "facegen/tensor_image.hpp"

namespace facegen::gan {

namespace {

torch::Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidArgument("empty latent batch");
  const auto d = static_cast<int64_t>(rows.front().size());
  auto t = torch::empty({static_cast<int64_t>(rows.size()), d}, torch::kFloat32);
  auto acc = t.accessor<float, 2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int64_t>(rows[i].size()) != d) throw DimensionMismatch("ragged latent batch");
    for (int64_t j = 0; j < d; ++j) acc[static_cast<int64_t>(i)][j] = static_cast<float>(rows[i][j]);
  }
  return t;
}

std::vector<double> row_of(const torch::Tensor& t, int64_t i) {
  const auto r = t[i].contiguous().to(torch::kFloat64);
  return {r.data_ptr<double>(), r.data_ptr<double>() + r.numel()};
}

}  // namespace

GeneratedBatch generate_batch(Generator& generator, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("generate_batch: n must be at least 1");
  const auto& cfg = generator->config();
  GeneratedBatch out;
  for (std::size_t i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    std::mt19937_64 item(seq);
    out.noise_seeds.push_back(item());
    out.latents.push_back(row_of(sample_latents(1, cfg.latent_dim, cfg.prior, item), 0));
  }
  GeneratorSampler sampler(generator);
  std::vector<std::vector<double>> ws;
  ws.reserve(n);
  for (const auto& z : out.latents) ws.push_back(sampler.map(z));
  out.images = sampler.synthesize_batch(ws, out.noise_seeds);
  return out;
}

void write_latent_log(const GeneratedBatch& batch, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  const std::size_t d = batch.latents.empty() ? 0 : batch.latents.front().size();
  os << "index,noise_seed";
  for (std::size_t j = 0; j < d; ++j) os << ",z" << j;
  os << "\n";
  char buf[32];
  for (std::size_t i = 0; i < batch.latents.size(); ++i) {
    os << i << "," << batch.noise_seeds[i];
    for (const double v : batch.latents[i]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << "," << buf;
    }
    os << "\n";
  }
}

GeneratorSampler::GeneratorSampler(Generator generator, std::size_t chunk)
    : generator_(std::move(generator)), chunk_(std::max<std::size_t>(chunk, 1)) {}

GeneratorSampler::GeneratorSampler(const Checkpoint& ckpt, std::size_t chunk)
    : GeneratorSampler(build_generator(ckpt), chunk) {}

std::size_t GeneratorSampler::latent_dim() const { return static_cast<std::size_t>(generator_->config().latent_dim); }

std::vector<double> GeneratorSampler::map(std::span<const double> z) const {
  if (z.size() != latent_dim()) throw DimensionMismatch("latent has the wrong dimension");
  torch::NoGradGuard guard;
  const auto zt = rows_to_tensor({{z.begin(), z.end()}});
  const auto w = generator_->mapping->truncate(generator_->mapping->forward(zt), generator_->config().truncation_psi);
  return row_of(w, 0);
}

Image GeneratorSampler::synthesize(std::span<const double> w, std::uint64_t noise_seed) const {
  return synthesize_batch({{w.begin(), w.end()}}, {noise_seed}).front();
}

std::vector<Image> GeneratorSampler::synthesize_batch(const std::vector<std::vector<double>>& ws,
                                                      const std::vector<std::uint64_t>& noise_seeds) const {
  if (ws.size() != noise_seeds.size()) throw DimensionMismatch("one noise seed per style is required");
  torch::NoGradGuard guard;
  std::vector<Image> out;
  out.reserve(ws.size());
  for (std::size_t start = 0; start < ws.size(); start += chunk_) {
    const std::size_t stop = std::min(ws.size(), start + chunk_);
    const std::vector<std::vector<double>> part(ws.begin() + static_cast<std::ptrdiff_t>(start),
                                                ws.begin() + static_cast<std::ptrdiff_t>(stop));
    const std::vector<std::uint64_t> seeds(noise_seeds.begin() + static_cast<std::ptrdiff_t>(start),
                                           noise_seeds.begin() + static_cast<std::ptrdiff_t>(stop));
    const auto images = generator_->synthesize(rows_to_tensor(part), generator_->make_noise(seeds));
    for (auto& im : to_images(images)) out.push_back(std::move(im));
  }
  return out;
}

std::vector<Image> GeneratorSampler::sample(std::size_t n, std::uint64_t seed) const {
  return generate_batch(generator_, n, seed).images;
}

}  // namespace facegen::gan
