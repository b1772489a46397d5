#include "facegen/gan/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "facegen/errors.hpp"

namespace facegen::gan {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'G', 'A', 'R', 'C', 'H', '0', '1'};
constexpr std::uint32_t kContainerVersion = 1;

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    case torch::kUInt8: return "u8";
    default: throw CheckpointError("unsupported tensor dtype in archive");
  }
}

torch::ScalarType dtype_from(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  if (s == "u8") return torch::kUInt8;
  throw CheckpointError("unknown dtype in archive: " + s);
}

}  // namespace

void save_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::vector<torch::Tensor> blobs;
  for (const auto& [name, t] : archive.tensors) {
    auto c = t.detach().contiguous().cpu();
    header["tensors"].push_back({{"name", name},
                                 {"dtype", dtype_name(c.scalar_type())},
                                 {"shape", c.sizes().vec()},
                                 {"bytes", c.nbytes()}});
    blobs.push_back(c);
  }
  const std::string text = header.dump();
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    const std::uint64_t len = text.size();
    out.write(kMagic.data(), kMagic.size());
    out.write(reinterpret_cast<const char*>(&kContainerVersion), sizeof kContainerVersion);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (const auto& b : blobs) out.write(static_cast<const char*>(b.data_ptr()), static_cast<std::streamsize>(b.nbytes()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || magic != kMagic) throw CheckpointError("not a facegen archive: " + path.string());
  if (version != kContainerVersion) throw CheckpointError("unsupported archive version " + std::to_string(version));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);

  TensorArchive archive;
  archive.meta = header.at("meta");
  for (const auto& e : header.at("tensors")) {
    const auto shape = e.at("shape").get<std::vector<int64_t>>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype_from(e.at("dtype").get<std::string>())));
    const auto bytes = e.at("bytes").get<std::uint64_t>();
    if (bytes != t.nbytes()) throw CheckpointError("tensor size mismatch in archive");
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    if (!in) throw CheckpointError("truncated archive: " + path.string());
    archive.tensors.emplace_back(e.at("name").get<std::string>(), t);
  }
  return archive;
}

NamedTensors module_state(const torch::nn::Module& module) {
  NamedTensors out;
  for (const auto& p : module.named_parameters(true)) out.emplace_back(p.key(), p.value().detach().clone());
  for (const auto& b : module.named_buffers(true)) out.emplace_back("buffer:" + b.key(), b.value().detach().clone());
  return out;
}

void load_module_state(torch::nn::Module& module, const NamedTensors& state) {
  std::map<std::string, torch::Tensor> lookup(state.begin(), state.end());
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& key, torch::Tensor& dst) {
    const auto it = lookup.find(key);
    if (it == lookup.end()) throw CheckpointError("checkpoint lacks tensor " + key);
    if (it->second.sizes() != dst.sizes()) throw CheckpointError("shape mismatch for tensor " + key);
    dst.copy_(it->second);
  };
  for (auto& p : module.named_parameters(true)) copy(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy("buffer:" + b.key(), b.value());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  TensorArchive a;
  a.meta["kind"] = "checkpoint";
  a.meta["format_version"] = ckpt.format_version;
  a.meta["model"] = ckpt.model;
  a.meta["train"] = ckpt.train;
  a.meta["state"] = ckpt.state;
  for (const auto& [k, v] : ckpt.generator) a.tensors.emplace_back("G/" + k, v);
  for (const auto& [k, v] : ckpt.discriminator) a.tensors.emplace_back("D/" + k, v);
  for (const auto& [k, v] : ckpt.optimizer) a.tensors.emplace_back("opt/" + k, v);
  save_archive(a, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const TensorArchive a = load_archive(path);
  if (a.meta.value("kind", "") != "checkpoint") throw CheckpointError("archive is not a checkpoint: " + path.string());
  Checkpoint c;
  c.format_version = a.meta.at("format_version").get<int>();
  if (c.format_version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.format_version));
  }
  c.model = a.meta.at("model").get<ModelConfig>();
  c.train = a.meta.at("train").get<TrainConfig>();
  c.state = a.meta.at("state").get<TrainState>();
  for (const auto& [k, v] : a.tensors) {
    if (k.starts_with("G/")) c.generator.emplace_back(k.substr(2), v);
    else if (k.starts_with("D/")) c.discriminator.emplace_back(k.substr(2), v);
    else if (k.starts_with("opt/")) c.optimizer.emplace_back(k.substr(4), v);
  }
  return c;
}

Generator build_generator(const Checkpoint& ckpt) {
  Generator g(ckpt.model);
  load_module_state(*g, ckpt.generator);
  g->eval();
  return g;
}

Discriminator build_discriminator(const Checkpoint& ckpt) {
  Discriminator d(ckpt.model);
  load_module_state(*d, ckpt.discriminator);
  return d;
}

}  // namespace facegen::gan
