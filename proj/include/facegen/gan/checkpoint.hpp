#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "facegen/gan/config.hpp"
#include "facegen/gan/networks.hpp"

namespace facegen::gan {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Container layout (all integers little endian):
///   8 bytes   magic "FGARCH01"
///   u32       container version
///   u64       header length L
///   L bytes   JSON header {"meta": {...}, "tensors": [{name, dtype, shape, bytes}, ...]}
///   blobs     raw contiguous tensor data in header order
struct TensorArchive {
  nlohmann::json meta = nlohmann::json::object();
  NamedTensors tensors;
};

void save_archive(const TensorArchive& archive, const std::filesystem::path& path);
TensorArchive load_archive(const std::filesystem::path& path);

/// Named parameters followed by named buffers, in registration order.
NamedTensors module_state(const torch::nn::Module& module);
/// Copies values into a module; throws CheckpointError on missing names or
/// shape mismatch.
void load_module_state(torch::nn::Module& module, const NamedTensors& state);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointVersion;
  ModelConfig model;
  TrainConfig train;
  TrainState state;
  NamedTensors generator;
  NamedTensors discriminator;
  NamedTensors optimizer;  // Adam moments, "g.m.<param>" etc.
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Generator build_generator(const Checkpoint& ckpt);
Discriminator build_discriminator(const Checkpoint& ckpt);

}  // namespace facegen::gan
